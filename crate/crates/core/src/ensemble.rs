//! Wigner real symmetric matrix sampling, entry order statistics, test
//! vectors, and the per-row diagnostic events used by the eigenvalue/entry
//! comparison arguments.

use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::limit_laws::Interval;
use crate::scalar::Real;
use crate::tail_laws::TailLaw;

/// Default `delta` in the "two entries above b_n^{3/4+delta} in one row" flag.
pub const DEFAULT_L1C_DELTA: f64 = 1.0 / 16.0;

/// SplitMix64 finalizer; replica seeds are derived as
/// `mix_seed(master, index)` so replica streams are independent of scheduling.
pub fn mix_seed(master_seed: u64, replica_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(replica_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One realized symmetric matrix together with its provenance.
#[derive(Clone, Debug)]
pub struct WignerSample<F> {
    n: usize,
    /// Dense row-major `n x n` storage; `a[i*n + j] == a[j*n + i]` bit-for-bit.
    entries: Vec<F>,
    seed: u64,
    law: TailLaw<F>,
}

/// Descending top-`k` normalized entry magnitudes with their upper-triangle
/// indices (`i <= j`, 0-based) and the normalization used.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderStats<F> {
    pub k: usize,
    /// `b_n^{-1} |a_{i_l j_l}|`, descending.
    pub values: Vec<F>,
    pub indices: Vec<(usize, usize)>,
    pub b_n: F,
}

/// Paper-style two-coordinate test vector and the value of `(A f, f)`.
#[derive(Clone, Debug)]
pub struct TestVector<F> {
    pub vector: Vec<F>,
    /// `|a_ij| + a_ii/2 + a_jj/2`, cross-checked against the direct
    /// matrix-vector product.
    pub quadratic_form: F,
}

#[derive(Clone, Copy, Debug)]
pub struct RowRecord<F> {
    pub max_abs: F,
    pub abs_sum: F,
    /// `abs_sum - max_abs`.
    pub remainder: F,
}

/// Row-event flags with thresholds taken verbatim from the source lemmas;
/// frequencies are monitored, not bound-tested.
#[derive(Clone, Debug)]
pub struct RowDiagnostics<F> {
    pub rows: Vec<RowRecord<F>>,
    /// Some diagonal entry exceeds `b_n^{11/20}` in absolute value.
    pub l1a: bool,
    /// Some pair `i < j` has `|a_ij| > b_n^{99/100}` and `|a_ii| + |a_jj| > b_n^{1/10}`.
    pub l1b: bool,
    /// Some row has at least two entries above `b_n^{3/4 + delta}`.
    pub l1c: bool,
    /// Some row has both max and remainder above `b_n^{3/4 + alpha/8}`.
    pub l2: bool,
    /// `max_i sum_j |a_ij|`.
    pub norm_inf: F,
    pub max_abs_entry: F,
}

/// Min-heap entry for top-k selection; orders by magnitude, ties broken so
/// that the lexicographically smaller index wins.
#[derive(PartialEq)]
struct HeapEntry<F> {
    abs: F,
    index: (usize, usize),
}

impl<F: Real> Eq for HeapEntry<F> {}

impl<F: Real> Ord for HeapEntry<F> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reverse: smallest magnitude at the top of the BinaryHeap (max-heap).
        other
            .abs
            .partial_cmp(&self.abs)
            .expect("entry magnitudes are finite")
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl<F: Real> PartialOrd for HeapEntry<F> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Streaming top-k selector over upper-triangle entries, with optional
/// interval counting of normalized magnitudes.
struct TopKCollector<F> {
    k: usize,
    heap: BinaryHeap<HeapEntry<F>>,
    inv_bn: F,
    intervals: Vec<Interval<F>>,
    counts: Vec<u64>,
}

impl<F: Real> TopKCollector<F> {
    fn new(k: usize, b_n: F, intervals: &[Interval<F>]) -> Self {
        TopKCollector {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
            inv_bn: b_n.recip(),
            intervals: intervals.to_vec(),
            counts: vec![0; intervals.len()],
        }
    }

    fn push(&mut self, value: F, index: (usize, usize)) {
        let abs = value.abs();
        let normalized = abs * self.inv_bn;
        for (interval, count) in self.intervals.iter().zip(self.counts.iter_mut()) {
            if interval.contains(normalized) {
                *count += 1;
            }
        }
        if self.heap.len() < self.k {
            self.heap.push(HeapEntry { abs, index });
        } else if let Some(worst) = self.heap.peek() {
            let candidate = HeapEntry { abs, index };
            // Reversed ordering: `Less` means the candidate beats the current
            // worst (larger magnitude, or equal with smaller index).
            if candidate.cmp(worst) == std::cmp::Ordering::Less {
                self.heap.pop();
                self.heap.push(candidate);
            }
        }
    }

    fn finish(self, b_n: F) -> (OrderStats<F>, Vec<u64>) {
        let mut picked = self.heap.into_vec();
        picked.sort_by(|a, b| {
            b.abs
                .partial_cmp(&a.abs)
                .expect("finite")
                .then_with(|| a.index.cmp(&b.index))
        });
        let stats = OrderStats {
            k: self.k,
            values: picked.iter().map(|e| e.abs * self.inv_bn).collect(),
            indices: picked.iter().map(|e| e.index).collect(),
            b_n,
        };
        (stats, self.counts)
    }
}

/// Samples a symmetric matrix: the upper triangle (including the diagonal) is
/// filled with i.i.d. draws in row-major order over `j >= i`, then mirrored.
pub fn sample_matrix<F: Real>(law: &TailLaw<F>, n: usize, seed: u64) -> Result<WignerSample<F>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "matrix dimension must be >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![F::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let a = law.sample_entry(&mut rng);
            entries[i * n + j] = a;
            entries[j * n + i] = a;
        }
    }
    Ok(WignerSample {
        n,
        entries,
        seed,
        law: *law,
    })
}

/// Entry order statistics and interval counts without materializing the
/// matrix; draws entries in exactly the order [`sample_matrix`] uses.
pub fn stream_entry_stats<F: Real>(
    law: &TailLaw<F>,
    n: usize,
    seed: u64,
    k: usize,
    b_n: F,
    intervals: &[Interval<F>],
) -> Result<(OrderStats<F>, Vec<u64>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "matrix dimension must be >= 2, got {n}"
        )));
    }
    check_k(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collector = TopKCollector::new(k, b_n, intervals);
    for i in 0..n {
        for j in i..n {
            collector.push(law.sample_entry(&mut rng), (i, j));
        }
    }
    Ok(collector.finish(b_n))
}

fn check_k(k: usize, n: usize) -> Result<()> {
    let max = n * (n + 1) / 2;
    if k < 1 || k > max {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {max}], got {k}"
        )));
    }
    Ok(())
}

impl<F: Real> WignerSample<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> &TailLaw<F> {
        &self.law
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> F {
        self.entries[i * self.n + j]
    }

    /// Exact top-`k` selection over the upper triangle by `|a_ij|`,
    /// normalized by `b_n`; ties broken by lexicographic `(i, j)`.
    pub fn top_entry_stats(&self, k: usize, b_n: F) -> Result<OrderStats<F>> {
        check_k(k, self.n)?;
        let mut collector = TopKCollector::new(k, b_n, &[]);
        for i in 0..self.n {
            for j in i..self.n {
                collector.push(self.entry(i, j), (i, j));
            }
        }
        Ok(collector.finish(b_n).0)
    }

    /// Counts of normalized entry magnitudes per interval.
    pub fn entry_interval_counts(&self, b_n: F, intervals: &[Interval<F>]) -> Vec<u64> {
        let mut collector = TopKCollector::new(1, b_n, intervals);
        for i in 0..self.n {
            for j in i..self.n {
                collector.push(self.entry(i, j), (i, j));
            }
        }
        collector.finish(b_n).1
    }

    /// Two-coordinate unit vector aligned with an off-diagonal entry:
    /// `f_i = 1/sqrt(2)`, `f_j = sign(a_ij)/sqrt(2)`, zeros elsewhere.
    /// `(A f, f)` is computed both in closed form and as a direct
    /// matrix-vector product; the two must agree to 1e-10 relative.
    pub fn build_test_vector(&self, i: usize, j: usize) -> Result<TestVector<F>> {
        if i == j {
            return Err(Error::InvalidParameter(
                "test vector requires an off-diagonal entry (i != j)".to_string(),
            ));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidParameter(format!(
                "index ({i}, {j}) out of range for n = {}",
                self.n
            )));
        }
        let inv_sqrt2 = F::of(std::f64::consts::FRAC_1_SQRT_2);
        let a_ij = self.entry(i, j);
        let sign = if a_ij < F::zero() {
            -F::one()
        } else {
            F::one()
        };
        let mut f = vec![F::zero(); self.n];
        f[i] = inv_sqrt2;
        f[j] = sign * inv_sqrt2;

        let closed = a_ij.abs() + F::of(0.5) * self.entry(i, i) + F::of(0.5) * self.entry(j, j);
        // Direct route: (A f, f) with the sparse f.
        let mut direct = F::zero();
        for (row, &fr) in f.iter().enumerate() {
            if fr != F::zero() {
                let mut af = F::zero();
                for (col, &fc) in f.iter().enumerate() {
                    if fc != F::zero() {
                        af += self.entry(row, col) * fc;
                    }
                }
                direct += af * fr;
            }
        }
        let scale = closed.abs().max(F::one());
        if (closed - direct).abs() > F::of(1e-10) * scale {
            return Err(Error::NumericalInconsistency(format!(
                "quadratic form mismatch: closed {closed} vs direct {direct}"
            )));
        }
        Ok(TestVector {
            vector: f,
            quadratic_form: closed,
        })
    }

    /// Per-row maxima/sums and the lemma-style event flags at scale `b_n`.
    pub fn row_diagnostics(&self, b_n: F, l1c_delta: F) -> RowDiagnostics<F> {
        let n = self.n;
        let alpha = self.law.alpha();
        let thr_diag = b_n.powf(F::of(11.0 / 20.0));
        let thr_big = b_n.powf(F::of(99.0 / 100.0));
        let thr_pair_diag = b_n.powf(F::of(0.1));
        let thr_l1c = b_n.powf(F::of(0.75) + l1c_delta);
        let thr_l2 = b_n.powf(F::of(0.75) + alpha / F::of(8.0));

        let mut rows = Vec::with_capacity(n);
        let mut l1a = false;
        let mut l1b = false;
        let mut l1c = false;
        let mut l2 = false;
        let mut norm_inf = F::zero();
        let mut max_abs_entry = F::zero();

        for i in 0..n {
            let mut max_abs = F::zero();
            let mut abs_sum = F::zero();
            let mut above_l1c = 0usize;
            for j in 0..n {
                let a = self.entry(i, j).abs();
                abs_sum += a;
                max_abs = max_abs.max(a);
                if a > thr_l1c {
                    above_l1c += 1;
                }
                if j > i && a > thr_big {
                    let diag = self.entry(i, i).abs() + self.entry(j, j).abs();
                    if diag > thr_pair_diag {
                        l1b = true;
                    }
                }
            }
            if self.entry(i, i).abs() > thr_diag {
                l1a = true;
            }
            if above_l1c >= 2 {
                l1c = true;
            }
            let remainder = abs_sum - max_abs;
            if max_abs > thr_l2 && remainder > thr_l2 {
                l2 = true;
            }
            norm_inf = norm_inf.max(abs_sum);
            max_abs_entry = max_abs_entry.max(max_abs);
            rows.push(RowRecord {
                max_abs,
                abs_sum,
                remainder,
            });
        }
        RowDiagnostics {
            rows,
            l1a,
            l1b,
            l1c,
            l2,
            norm_inf,
            max_abs_entry,
        }
    }

    /// Plain-text dump: first line `n`, then upper-triangle values row-major,
    /// one per line, 17 significant digits.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.n)?;
        for i in 0..self.n {
            for j in i..self.n {
                writeln!(out, "{:.16e}", self.entry(i, j).to_f64_lossy())?;
            }
        }
        Ok(())
    }

    /// Reads a matrix dump back; provenance (law, seed) is not part of the
    /// format, so the caller supplies the law and the seed defaults to 0.
    pub fn load<R: BufRead>(input: R, law: TailLaw<F>) -> Result<Self> {
        let mut lines = input.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidSpec("empty matrix dump".to_string()))??
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec("bad dimension line".to_string()))?;
        let mut entries = vec![F::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::InvalidSpec("truncated matrix dump".to_string()))??;
                let value: f64 = line
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad value line '{line}'")))?;
                entries[i * n + j] = F::of(value);
                entries[j * n + i] = F::of(value);
            }
        }
        Ok(WignerSample {
            n,
            entries,
            seed: 0,
            law,
        })
    }

    /// Builds a sample directly from given entries (symmetrized from the
    /// upper triangle); used by tests and diagnostics on fixed matrices.
    pub fn from_upper_triangle(n: usize, law: TailLaw<F>, upper: &[F]) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "expected {} upper-triangle entries, got {}",
                n * (n + 1) / 2,
                upper.len()
            )));
        }
        let mut entries = vec![F::zero(); n * n];
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                entries[i * n + j] = upper[idx];
                entries[j * n + i] = upper[idx];
                idx += 1;
            }
        }
        Ok(WignerSample {
            n,
            entries,
            seed: 0,
            law,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> TailLaw<f64> {
        TailLaw::pareto(1.0, 1.0).unwrap()
    }

    #[test]
    fn mix_seed_spreads() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // Known SplitMix64 value for state 0 step 1.
        assert_eq!(mix_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn sample_is_symmetric_and_deterministic() {
        let s1 = sample_matrix(&law(), 8, 99).unwrap();
        let s2 = sample_matrix(&law(), 8, 99).unwrap();
        assert_eq!(s1.entries, s2.entries);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(s1.entry(i, j).to_bits(), s1.entry(j, i).to_bits());
            }
        }
        let s3 = sample_matrix(&law(), 8, 100).unwrap();
        assert_ne!(s1.entries, s3.entries);
        assert!(sample_matrix(&law(), 1, 0).is_err());
    }

    #[test]
    fn top_entry_stats_enumeration() {
        // [[1, -5], [-5, 2]]: values (5, 2), indices ((0,1), (1,1)).
        let s = WignerSample::from_upper_triangle(2, law(), &[1.0, -5.0, 2.0]).unwrap();
        let stats = s.top_entry_stats(2, 1.0).unwrap();
        assert_eq!(stats.values, vec![5.0, 2.0]);
        assert_eq!(stats.indices, vec![(0, 1), (1, 1)]);
        // k = N gives the full nonincreasing list.
        let full = s.top_entry_stats(3, 1.0).unwrap();
        assert_eq!(full.values, vec![5.0, 2.0, 1.0]);
        assert!(s.top_entry_stats(4, 1.0).is_err());
        assert!(s.top_entry_stats(0, 1.0).is_err());
    }

    #[test]
    fn top_entry_stats_ties_lexicographic() {
        let s =
            WignerSample::from_upper_triangle(3, law(), &[3.0, 3.0, 1.0, 3.0, 1.0, 1.0]).unwrap();
        let stats = s.top_entry_stats(2, 1.0).unwrap();
        assert_eq!(stats.indices, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn top_entry_stats_normalization() {
        let s = WignerSample::from_upper_triangle(2, law(), &[1.0, -5.0, 2.0]).unwrap();
        let stats = s.top_entry_stats(1, 2.0).unwrap();
        assert_eq!(stats.values, vec![2.5]);
        assert_eq!(stats.b_n, 2.0);
    }

    #[test]
    fn stream_matches_matrix_path() {
        let l = law();
        let n = 40;
        let seed = 777;
        let b_n = l.solve_bn(n).unwrap();
        let intervals = vec![
            Interval::new(0.5, 1.0).unwrap(),
            Interval::new(1.0, f64::INFINITY).unwrap(),
        ];
        let (stream_stats, stream_counts) =
            stream_entry_stats(&l, n, seed, 5, b_n, &intervals).unwrap();
        let sample = sample_matrix(&l, n, seed).unwrap();
        let stats = sample.top_entry_stats(5, b_n).unwrap();
        let counts = sample.entry_interval_counts(b_n, &intervals);
        assert_eq!(stream_stats, stats);
        assert_eq!(stream_counts, counts);
    }

    #[test]
    fn test_vector_examples() {
        // A = [[0, 3], [3, 0]]: f = (1/sqrt2, 1/sqrt2), (Af, f) = 3.
        let s = WignerSample::from_upper_triangle(2, law(), &[0.0, 3.0, 0.0]).unwrap();
        let tv = s.build_test_vector(0, 1).unwrap();
        assert!((tv.quadratic_form - 3.0).abs() < 1e-12);
        assert!((tv.vector[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((tv.vector[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        // Negative entry flips the second coordinate.
        let s = WignerSample::from_upper_triangle(2, law(), &[0.0, -3.0, 0.0]).unwrap();
        let tv = s.build_test_vector(0, 1).unwrap();
        assert!((tv.quadratic_form - 3.0).abs() < 1e-12);
        assert!(tv.vector[1] < 0.0);

        // A = [[2, -3], [-3, 4]]: |a_01| + a_00/2 + a_11/2 = 3 + 1 + 2 = 6.
        let s = WignerSample::from_upper_triangle(2, law(), &[2.0, -3.0, 4.0]).unwrap();
        let tv = s.build_test_vector(0, 1).unwrap();
        assert!((tv.quadratic_form - 6.0).abs() < 1e-12);

        assert!(s.build_test_vector(1, 1).is_err());
    }

    #[test]
    fn row_diagnostics_flags() {
        // Single huge entry, b_n = 1e4: all flags false, norm ratio near 1.
        let mut upper = vec![0.0; 6];
        upper[1] = 1e6; // a_01
        upper[2] = 0.5; // a_02
        upper[4] = -0.3; // a_12
        let s = WignerSample::from_upper_triangle(3, law(), &upper).unwrap();
        let diag = s.row_diagnostics(1e4, DEFAULT_L1C_DELTA);
        assert!(!diag.l1a && !diag.l1b && !diag.l1c && !diag.l2);
        let ratio = diag.norm_inf / diag.max_abs_entry;
        assert!((1.0..1.0 + 1e-5).contains(&ratio), "ratio {ratio}");

        // Diagonal at b_n trips the diagonal flag.
        let s = WignerSample::from_upper_triangle(2, law(), &[1e4, 0.0, 0.0]).unwrap();
        let diag = s.row_diagnostics(1e4, DEFAULT_L1C_DELTA);
        assert!(diag.l1a);
    }

    #[test]
    fn row_diagnostics_l2_and_l1c() {
        // b_n = 16: l1c threshold 16^{13/16} ~ 9.5, l2 threshold 16^{7/8} ~ 11.3.
        let b_n: f64 = 16.0;
        let big = 12.0;
        let s = WignerSample::from_upper_triangle(3, law(), &[0.0, big, big, 0.0, 0.0, 0.0])
            .unwrap();
        let diag = s.row_diagnostics(b_n, DEFAULT_L1C_DELTA);
        assert!(diag.l1c, "two large entries in row 0");
        assert!(diag.l2, "max and remainder both exceed the threshold");
    }

    #[test]
    fn dump_round_trip() {
        let s = sample_matrix(&law(), 6, 5).unwrap();
        let mut buf = Vec::new();
        s.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("6\n"));
        assert_eq!(text.lines().count(), 1 + 21);
        let loaded = WignerSample::load(&buf[..], law()).unwrap();
        assert_eq!(loaded.entries, s.entries);
    }
}
