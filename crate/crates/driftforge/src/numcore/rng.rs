/// Deterministic pseudo-random generator based on SplitMix64
/// (Steele, Lea & Flood, "Fast splittable pseudorandom number generators",
/// OOPSLA 2014; the same finalizer Vigna uses to seed xoshiro).
///
/// The implementation is spelled out here rather than pulled from a crate so
/// that every stream is reproducible from a single u64 across platforms and
/// dependency upgrades. That byte-for-byte stability is load-bearing: run
/// artifacts are compared byte-identically across repeat runs.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derives a child seed from a parent seed and a path of indices, so
    /// per-cell and per-instance streams never overlap by construction.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut s = seed;
        for &p in path {
            s = mix64(s ^ mix64(p.wrapping_add(GOLDEN_GAMMA)));
        }
        Rng::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via Box-Muller. Uses 1 - u for the log argument
    /// so it never sees exactly zero.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in [0, n). Panics if n == 0; callers guard emptiness.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() on empty range");
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }

    /// k distinct indices drawn uniformly from [0, n), in selection order.
    /// Panics if k > n; callers validate counts first.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Splits off an independent child generator. The child stream and the
    /// continuation of the parent stream do not overlap.
    pub fn split(&mut self) -> Rng {
        let s = self.next_u64();
        Rng::new(mix64(s ^ GOLDEN_GAMMA))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = Rng::new(1);
        let mut b = Rng::new(2);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    // Reference values computed from the published SplitMix64 algorithm
    // (seed 1234567): they pin the exact sequence forever.
    #[test]
    fn splitmix64_reference_sequence() {
        let mut r = Rng::new(1234567);
        assert_eq!(r.next_u64(), 0x599e_d017_fb08_fc85);
        assert_eq!(r.next_u64(), 0x2c73_f084_5854_0fa5);
        assert_eq!(r.next_u64(), 0x883e_bce5_a3f2_7c77);
        assert_eq!(r.next_u64(), 0x3fbe_f740_e917_7b3f);
    }

    #[test]
    fn uniform_mean_is_centered() {
        let mut r = Rng::new(99);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| r.next_f64()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn normal_moments() {
        let mut r = Rng::new(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn index_stays_in_bounds() {
        let mut r = Rng::new(5);
        for n in 1..20usize {
            for _ in 0..200 {
                assert!(r.index(n) < n);
            }
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::new(11);
        let mut xs: Vec<usize> = (0..50).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn sample_indices_distinct() {
        let mut r = Rng::new(13);
        let got = r.sample_indices(100, 40);
        assert_eq!(got.len(), 40);
        let mut sorted = got.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 40);
        assert!(sorted.iter().all(|&i| i < 100));
    }

    #[test]
    fn split_streams_are_independent() {
        let mut parent = Rng::new(21);
        let mut child = parent.split();
        let a: Vec<u64> = (0..32).map(|_| parent.next_u64()).collect();
        let b: Vec<u64> = (0..32).map(|_| child.next_u64()).collect();
        assert_ne!(a, b);
        // And deterministic: re-derive the same way, get the same answer.
        let mut parent2 = Rng::new(21);
        let mut child2 = parent2.split();
        assert_eq!(b, (0..32).map(|_| child2.next_u64()).collect::<Vec<_>>());
    }

    #[test]
    fn derive_depends_on_full_path() {
        let mut a = Rng::derive(42, &[1, 2]);
        let mut b = Rng::derive(42, &[2, 1]);
        let mut c = Rng::derive(42, &[1, 2]);
        let first_a = a.next_u64();
        assert_ne!(first_a, b.next_u64(), "path order must matter");
        assert_eq!(first_a, c.next_u64(), "same path must reproduce");
        assert_ne!(
            Rng::derive(42, &[1]).next_u64(),
            Rng::derive(43, &[1]).next_u64(),
            "seed must matter"
        );
    }
}
