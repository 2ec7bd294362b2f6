//! Seed derivation and optional thread fan-out shared by the optimizers and
//! verification suites.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic per-stream RNG: every (seed, label, counter) triple yields
/// an independent stream, so concurrent schedules cannot change results.
pub fn stream_rng(seed: u64, label: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(
        seed ^ label_hash(label).rotate_left(17) ^ splitmix(counter),
    ))
}

/// Parallelism cap: `TENSIONLAB_THREADS` if set, else 1.
pub fn thread_cap() -> usize {
    std::env::var("TENSIONLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Runs `f(0..n)` and returns the results in index order. Work is split
/// across at most `thread_cap()` scoped threads; the output is independent
/// of the schedule because each index computes from its own inputs only.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_cap().min(n.max(1));
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, s) in slot.iter_mut().enumerate() {
                    *s = Some(f(t * chunk + k));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("filled")).collect()
}

/// Rounds to 12 significant digits and prints the shortest decimal that
/// round-trips, e.g. `2.0`, `0.531004406411`.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - mag);
    let rounded = (x * scale).round() / scale;
    format!("{rounded:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_stable_and_distinct() {
        let a1 = stream_rng(0, "suite", 3).next_u64();
        let a2 = stream_rng(0, "suite", 3).next_u64();
        let b = stream_rng(0, "suite", 4).next_u64();
        let c = stream_rng(0, "other", 3).next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_ne!(a1, c);
    }

    #[test]
    fn map_indexed_in_order() {
        let v = map_indexed(10, |i| i * i);
        assert_eq!(v, vec![0, 1, 4, 9, 16, 25, 36, 49, 64, 81]);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(2.0), "2.0");
        assert_eq!(format_sig12(0.0), "0.0");
        assert_eq!(format_sig12(0.5310044064107188), "0.531004406411");
        assert_eq!(format_sig12(-1.5), "-1.5");
    }
}
