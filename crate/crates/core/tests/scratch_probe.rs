// temporary probe; deleted before finishing
use rand::Rng;
use tensionlab_core::dist::{Alphabet, JointDist};
use tensionlab_core::tension::{self, oracle, OptBudget};
use tensionlab_core::util;

fn random_dist(na: usize, nb: usize, rng: &mut impl Rng) -> JointDist {
    let n = na * nb;
    let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0f64)).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let s: f64 = probs.iter().sum();
    probs[0] += 1.0 - s;
    JointDist::new(
        vec![
            ("A".into(), Alphabet::of_size(na)),
            ("B".into(), Alphabet::of_size(nb)),
        ],
        probs,
    )
    .unwrap()
}

#[test]
fn probe_random_instances() {
    let budget = OptBudget::default();
    let opts = oracle::OracleOptions::default();
    let t0 = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = util::stream_rng(0, "probe-2x2", i);
        let d = random_dist(2, 2, &mut rng);
        let (t, _) = tension::wyner_tension(&d, &budget).unwrap();
        let o = oracle::wyner_tension_oracle(&d, &opts).unwrap();
        let diff = (t - o).abs();
        worst = worst.max(diff);
        if diff > 1e-3 {
            eprintln!("2x2 #{i}: opt {t:.8} oracle {o:.8} diff {diff:.2e}");
        }
    }
    eprintln!("2x2 done in {:?}, worst diff {worst:.2e}", t0.elapsed());
    let t1 = std::time::Instant::now();
    let mut worst3: f64 = 0.0;
    for i in 0..10u64 {
        let mut rng = util::stream_rng(0, "probe-3x3", i);
        let d = random_dist(3, 3, &mut rng);
        let (t, _) = tension::wyner_tension(&d, &budget).unwrap();
        let o = oracle::wyner_tension_oracle(&d, &opts).unwrap();
        let diff = (t - o).abs();
        worst3 = worst3.max(diff);
        eprintln!("3x3 #{i}: opt {t:.8} oracle {o:.8} diff {diff:.2e}");
    }
    eprintln!("3x3 done in {:?}, worst diff {worst3:.2e}", t1.elapsed());
    assert!(worst < 2e-3 && worst3 < 2e-3);
}
