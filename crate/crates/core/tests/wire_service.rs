use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use expsos_core::cloud::{remote_worker, wire, CloudWorker, Request, Server, Task};
use expsos_core::modexp_sos::{outsource_hcs, outsource_ms};
use expsos_core::{
    ArithContext, BigUint, Error, FactoredModulus, InProcessWorker, ModExpQuery, OutsourceKey,
    Verdict, WorkerBehavior,
};

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

fn example_key() -> OutsourceKey {
    OutsourceKey::from_parts(FactoredModulus::prime(big(431)).unwrap(), big(397)).unwrap()
}

#[test]
fn example_query_over_loopback() {
    let server = Server::bind("127.0.0.1:0", WorkerBehavior::Honest, 0).unwrap().spawn().unwrap();
    let remote = remote_worker(&server.local_addr().to_string()).unwrap();
    let req = Request {
        id: "q".into(),
        task: Task::ModExp(ModExpQuery {
            base: big(63115),
            exponent: big(143106),
            modulus: big(171107),
        }),
    };
    let over_wire = remote.submit(std::slice::from_ref(&req)).unwrap();
    let local = InProcessWorker::honest().submit(&[req]).unwrap();
    assert_eq!(over_wire, local);

    let mut ctx = ArithContext::new(3);
    let rep = outsource_hcs(&example_key(), &big(189), &big(346), &remote, &mut ctx).unwrap();
    assert_eq!(rep.result, Some(big(190)));
}

#[test]
fn malformed_line_gets_one_error_and_connection_survives() {
    let server = Server::bind("127.0.0.1:0", WorkerBehavior::Honest, 0).unwrap().spawn().unwrap();
    let stream = TcpStream::connect(server.local_addr()).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    writer.write_all(b"{\"op\":\"modexp\",\"id\":\"bad\"}\n").unwrap();
    writer
        .write_all(b"{\"op\":\"modexp\",\"u\":\"2\",\"a\":\"a\",\"l\":\"3e8\",\"id\":\"good\"}\n")
        .unwrap();
    let mut first = String::new();
    reader.read_line(&mut first).unwrap();
    let first = wire::decode_response(&first).unwrap();
    assert_eq!(first.id, "bad");
    assert!(first.outcome.is_err());
    let mut second = String::new();
    reader.read_line(&mut second).unwrap();
    assert_eq!(second.trim_end(), r#"{"id":"good","ok":true,"r":"18"}"#);
}

#[test]
fn refused_query_is_a_protocol_error() {
    let server = Server::bind("127.0.0.1:0", WorkerBehavior::Honest, 0).unwrap().spawn().unwrap();
    let remote = remote_worker(&server.local_addr().to_string()).unwrap();
    let out = remote
        .submit(&[Request {
            id: "x".into(),
            task: Task::ModExp(ModExpQuery {
                base: big(9),
                exponent: big(2),
                modulus: big(5),
            }),
        }])
        .unwrap();
    assert!(out[0].outcome.is_err());
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let remote = remote_worker(&format!("127.0.0.1:{port}")).unwrap();
    let mut ctx = ArithContext::new(0);
    let err = outsource_hcs(&example_key(), &big(5), &big(7), &remote, &mut ctx).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
}

#[test]
fn seeded_adversary_server_is_reproducible() {
    let run = || {
        let server = Server::bind("127.0.0.1:0", WorkerBehavior::RandomForger, 42)
            .unwrap()
            .spawn()
            .unwrap();
        let remote = remote_worker(&server.local_addr().to_string()).unwrap();
        let mut ctx = ArithContext::new(1);
        (0..5)
            .map(|_| outsource_ms(&example_key(), &big(189), &big(346), 4, &remote, &mut ctx).unwrap())
            .collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|r| r.verified == Verdict::Rejected || r.result != Some(big(190))));
}

#[test]
fn hundred_concurrent_clients() {
    let server = Server::bind("127.0.0.1:0", WorkerBehavior::Honest, 0).unwrap().spawn().unwrap();
    let addr = server.local_addr().to_string();
    let key = example_key();
    std::thread::scope(|s| {
        for i in 0..100u64 {
            let (addr, key) = (&addr, &key);
            s.spawn(move || {
                let remote = remote_worker(addr).unwrap();
                let mut ctx = ArithContext::new(i);
                let u = big(i % 431);
                let rep = outsource_ms(key, &u, &big(346 + i), 8, &remote, &mut ctx).unwrap();
                assert_eq!(rep.result, Some(u.modpow(&big(346 + i), &big(431))));
            });
        }
    });
}
