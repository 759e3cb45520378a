//! Streaming moments, chunked parallel reduction and a few test statistics.

use std::ops::Range;

use rayon::prelude::*;

/// Count, mean and centred second moment, mergeable in any tree shape.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n;
        Moments {
            count: self.count + other.count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Runs `f` over consecutive index chunks of `0..n` in parallel and returns
/// the per-chunk results in chunk order, so a sequential fold over the
/// result is identical for any worker count.
pub fn chunked<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

/// Merges chunk moments pairwise, left to right in a fixed tree.
pub fn merge_all(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            merge_all(a).merge(&merge_all(b))
        }
    }
}

/// Estimate of a probability from Bernoulli trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub successes: u64,
    pub trials: u64,
}

impl ProbEstimate {
    pub fn p(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Sample variance of `xs` together with its jackknife standard error.
pub fn jackknife_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 3 {
        let m: Moments = xs.iter().copied().collect();
        return (m.variance(), f64::NAN);
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = ss / (nf - 1.0);
    // leave-one-out: SS_(i) = SS - n/(n-1) d_i^2
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| {
            let d = x - mean;
            (ss - nf / (nf - 1.0) * d * d) / (nf - 2.0)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let jk = loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    (var, jk.sqrt())
}

/// One-sample Kolmogorov–Smirnov statistic of `u` against Uniform[0,1].
/// Sorts `u` in place.
pub fn ks_uniform(u: &mut [f64]) -> f64 {
    u.sort_by(|a, b| a.total_cmp(b));
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// Largest vertical distance between the empirical CDFs of two samples.
pub fn ecdf_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
