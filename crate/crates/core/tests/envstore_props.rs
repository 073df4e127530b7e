mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;

use psg_core::envstore::{deserialize, serialize, EnvStore, EnvironmentSnapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(s: &EnvironmentSnapshot) -> Vec<u64> {
    let dv = &s.design_values;
    let mut out = vec![dv.f_max.to_bits(), dv.d_th.to_bits(), dv.zeta.to_bits()];
    for r in &s.skeletons {
        out.extend([r.radius].iter().chain(&r.o).chain(&r.p).chain(&r.q).map(|x| x.to_bits()));
    }
    out
}

#[test]
fn random_snapshots_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..1000u64 {
        let n = rng.random_range(0..12);
        let snap = common::random_snapshot(&mut rng, k, n);
        let bytes = serialize(&snap).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, snap, "snapshot {k}");
        assert_eq!(bits(&back), bits(&snap), "snapshot {k}");
        assert_eq!(serialize(&back).unwrap(), bytes);
    }
}

/// Every published document is derived from its version, so a reader can
/// tell a complete document from a mix of two.
fn versioned(version: u64) -> EnvironmentSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(version);
    common::random_snapshot(&mut rng, version, (version % 5) as usize + 1)
}

#[test]
fn interleaved_publish_and_latest_never_tear() {
    const ITERATIONS: u64 = 10_000;
    let dir = tempfile::tempdir().unwrap();
    let store = EnvStore::open(dir.path(), 4).unwrap();
    let done = Arc::new(AtomicBool::new(false));
    let readers: Vec<_> = (0..2)
        .map(|_| {
            let (store, done) = (store.clone(), done.clone());
            thread::spawn(move || {
                let (mut reads, mut last) = (0u64, 0u64);
                while !done.load(Ordering::Acquire) {
                    if let Some(snap) = store.latest().unwrap() {
                        assert!(snap.version >= last, "version went back from {last} to {}", snap.version);
                        assert_eq!(*snap, versioned(snap.version), "torn read of version {}", snap.version);
                        last = snap.version;
                        reads += 1;
                    }
                }
                reads
            })
        })
        .collect();
    for v in 1..=ITERATIONS {
        store.publish(&versioned(v)).unwrap();
        if v % 16 == 0 {
            let snap = store.latest().unwrap().unwrap();
            assert_eq!(snap.version, v);
        }
    }
    done.store(true, Ordering::Release);
    let reads: u64 = readers.into_iter().map(|h| h.join().unwrap()).sum();
    assert!(reads > 0);
    assert_eq!(store.latest().unwrap().unwrap().version, ITERATIONS);
    assert!(store.versions().unwrap().len() <= 4);
}
