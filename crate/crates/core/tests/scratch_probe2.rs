// temporary probe; deleted before finishing
use rand::Rng;
use tensionlab_core::dist::{Alphabet, JointDist};
use tensionlab_core::tension::{self, OptBudget};
use tensionlab_core::util;

fn random_dist(na: usize, nb: usize, rng: &mut impl Rng) -> JointDist {
    let n = na * nb;
    let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0f64)).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() { *p /= total; }
    let s: f64 = probs.iter().sum();
    probs[0] += 1.0 - s;
    JointDist::new(vec![("A".into(), Alphabet::of_size(na)), ("B".into(), Alphabet::of_size(nb))], probs).unwrap()
}

#[test]
fn probe_3x3_feasibility() {
    for i in 0..10u64 {
        let mut rng = util::stream_rng(0, "probe-3x3", i);
        let d = random_dist(3, 3, &mut rng);
        match tension::wyner_tension(&d, &OptBudget::default()) {
            Ok((t, w)) => eprintln!("#{i}: T = {t:.8} r3 = {:.2e}", w.r3),
            Err(e) => eprintln!("#{i}: ERR {e}"),
        }
    }
}
