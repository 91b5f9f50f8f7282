pub mod dsa; pub mod ibe;
