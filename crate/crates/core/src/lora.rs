//! A frozen linear map `Wx + b` with a trainable low-rank delta `BA`:
//!
//! ```text
//! L(x) = (W + BA) x + b,   A: k x n,  B: m x k,  k < min(m, n)
//! ```
//!
//! `A` starts small and random, `B` starts at zero so training begins at the
//! base map. Only `A` and `B` are ever updated.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoraLinear {
    w: DMatrix<f64>,
    b: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
}

/// Mean-squared-error gradients with respect to the adapter factors.
#[derive(Debug, Clone)]
pub struct LoraGradient {
    pub a: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
}

impl LoraLinear {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>, rank: usize, seed: u64) -> Result<Self> {
        let (m, n) = w.shape();
        if b.len() != m {
            return Err(Error::InvalidInput(format!("bias has {} entries, W has {m} rows", b.len())));
        }
        if rank == 0 || rank >= m.min(n) {
            return Err(Error::InvalidInput(format!("rank {rank} must be in 1..{}", m.min(n))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[b"lora-a"]));
        let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("positive sd");
        let a = DMatrix::from_fn(rank, n, |_, _| normal.sample(&mut rng));
        Ok(LoraLinear {
            w,
            b,
            a,
            b_mat: DMatrix::zeros(m, rank),
        })
    }

    /// Build from explicit factors.
    pub fn from_parts(w: DMatrix<f64>, b: DVector<f64>, a: DMatrix<f64>, b_mat: DMatrix<f64>) -> Result<Self> {
        let (m, n) = w.shape();
        let k = a.nrows();
        if b.len() != m || a.ncols() != n || b_mat.shape() != (m, k) || k == 0 {
            return Err(Error::InvalidInput("adapter factor shapes do not match W".into()));
        }
        Ok(LoraLinear { w, b, a, b_mat })
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn rank_budget(&self) -> usize {
        self.a.nrows()
    }

    /// `BA`, an `m x n` matrix.
    pub fn delta(&self) -> DMatrix<f64> {
        &self.b_mat * &self.a
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.w.ncols() {
            return Err(Error::InvalidInput(format!("input has {} entries, expected {}", x.len(), self.w.ncols())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(&self.w * x + &self.b_mat * (&self.a * x) + &self.b)
    }

    /// Mean over pairs of `0.5 * |L(x) - t|^2`.
    pub fn loss(&self, data: &[(DVector<f64>, DVector<f64>)]) -> Result<f64> {
        Ok(self.loss_and_gradient(data)?.0)
    }

    pub fn loss_and_gradient(&self, data: &[(DVector<f64>, DVector<f64>)]) -> Result<(f64, LoraGradient)> {
        if data.is_empty() {
            return Err(Error::InvalidInput("no training pairs".into()));
        }
        let scale = 1.0 / data.len() as f64;
        let mut ga = DMatrix::zeros(self.a.nrows(), self.a.ncols());
        let mut gb = DMatrix::zeros(self.b_mat.nrows(), self.b_mat.ncols());
        let mut loss = 0.0;
        for (x, t) in data {
            if t.len() != self.w.nrows() {
                return Err(Error::InvalidInput("target dimension mismatch".into()));
            }
            let ax = &self.a * x;
            let r = self.forward(x)? - t;
            loss += 0.5 * r.norm_squared();
            gb += &r * ax.transpose();
            ga += (self.b_mat.transpose() * &r) * x.transpose();
        }
        Ok((
            loss * scale,
            LoraGradient {
                a: ga * scale,
                b_mat: gb * scale,
            },
        ))
    }

    /// Full-batch gradient descent on `A` and `B`; `W` and `b` are moved
    /// over untouched.
    pub fn train(mut self, data: &[(DVector<f64>, DVector<f64>)], steps: usize, lr: f64) -> Result<Self> {
        for _ in 0..steps {
            let (_, g) = self.loss_and_gradient(data)?;
            self.a -= g.a * lr;
            self.b_mat -= g.b_mat * lr;
        }
        Ok(self)
    }

    /// Number of singular values of `BA` above `1e-8` times the largest.
    pub fn effective_rank(&self) -> usize {
        numerical_rank(&self.delta())
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        DMatrix::from_fn(rows, cols, |_, _| n.sample(&mut rng))
    }

    fn random_layer(m: usize, n: usize, k: usize, seed: u64) -> LoraLinear {
        let mut l = LoraLinear::new(random_matrix(m, n, seed), random_matrix(m, 1, seed + 1).column(0).into(), k, seed).unwrap();
        l.b_mat = random_matrix(m, k, seed + 2);
        l
    }

    #[test]
    fn zero_delta_and_zero_input() {
        let l = LoraLinear::new(random_matrix(4, 3, 1), DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), 2, 0).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        assert_eq!(l.forward(&x).unwrap(), l.weight() * &x + l.bias());
        let l = random_layer(4, 3, 2, 3);
        assert_eq!(l.forward(&DVector::zeros(3)).unwrap(), *l.bias());
        assert!(l.forward(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn forward_matches_naive_loops() {
        let l = random_layer(4, 3, 2, 5);
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let mut want = vec![0.0; 4];
        for i in 0..4 {
            let mut s = l.bias()[i];
            for j in 0..3 {
                let mut d = 0.0;
                for r in 0..2 {
                    d += l.b_mat[(i, r)] * l.a[(r, j)];
                }
                s += (l.weight()[(i, j)] + d) * x[j];
            }
            want[i] = s;
        }
        let got = l.forward(&x).unwrap();
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_checks() {
        assert!(LoraLinear::new(random_matrix(4, 3, 1), DVector::zeros(4), 3, 0).is_err());
        assert!(LoraLinear::new(random_matrix(4, 3, 1), DVector::zeros(4), 0, 0).is_err());
        let fresh = LoraLinear::new(random_matrix(4, 3, 1), DVector::zeros(4), 2, 0).unwrap();
        assert_eq!(fresh.effective_rank(), 0);
        assert!(random_layer(6, 5, 2, 9).effective_rank() <= 2);
        let mut parallel = random_layer(6, 5, 2, 9);
        let col = parallel.b_mat.column(0).clone_owned();
        parallel.b_mat.set_column(1, &(col * -2.5));
        assert_eq!(parallel.effective_rank(), 1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = random_layer(3, 4, 2, 17);
        let data: Vec<_> = (0..6)
            .map(|s| (random_matrix(4, 1, 100 + s).column(0).into(), random_matrix(3, 1, 200 + s).column(0).into()))
            .collect();
        let (_, g) = l.loss_and_gradient(&data).unwrap();
        let h = 1e-6;
        let rel = |an: f64, nu: f64| (an - nu).abs() / an.abs().max(nu.abs()).max(1e-8);
        for idx in 0..l.a.len() {
            let (mut p, mut q) = (l.clone(), l.clone());
            p.a[idx] += h;
            q.a[idx] -= h;
            let nu = (p.loss(&data).unwrap() - q.loss(&data).unwrap()) / (2.0 * h);
            assert!(rel(g.a[idx], nu) < 1e-4, "dA[{idx}] {} vs {nu}", g.a[idx]);
        }
        for idx in 0..l.b_mat.len() {
            let (mut p, mut q) = (l.clone(), l.clone());
            p.b_mat[idx] += h;
            q.b_mat[idx] -= h;
            let nu = (p.loss(&data).unwrap() - q.loss(&data).unwrap()) / (2.0 * h);
            assert!(rel(g.b_mat[idx], nu) < 1e-4, "dB[{idx}] {} vs {nu}", g.b_mat[idx]);
        }
    }

    #[test]
    fn zero_steps_leaves_layer_unchanged() {
        let l = random_layer(4, 3, 1, 2);
        let data = vec![(DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::zeros(4))];
        assert_eq!(l.clone().train(&data, 0, 0.1).unwrap(), l);
    }

    #[test]
    fn recovers_rank_one_update() {
        let (m, n) = (5, 4);
        let w = random_matrix(m, n, 40);
        let b = random_matrix(m, 1, 41).column(0).clone_owned();
        let u = random_matrix(m, 1, 42);
        let v = random_matrix(n, 1, 43);
        let target = &w + &u * v.transpose();
        let data: Vec<_> = (0..24)
            .map(|s| {
                let x: DVector<f64> = random_matrix(n, 1, 500 + s).column(0).into();
                let t = &target * &x + &b;
                (x, t)
            })
            .collect();
        let layer = LoraLinear::new(w.clone(), b.clone(), 1, 7).unwrap();
        let w_bits: Vec<u64> = w.iter().map(|v| v.to_bits()).collect();
        let trained = layer.train(&data, 4000, 0.05).unwrap();
        let loss = trained.loss(&data).unwrap();
        assert!(loss < 1e-6, "loss {loss}");
        assert_eq!(trained.weight().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), w_bits);
        assert_eq!(trained.bias(), &b);
        assert_eq!(trained.effective_rank(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rank_never_exceeds_budget(m in 2usize..8, n in 2usize..8, k_raw in 1usize..7, seed in any::<u64>()) {
            let k = 1 + k_raw % (m.min(n) - 1).max(1);
            prop_assume!(k < m.min(n));
            let mut l = random_layer(m, n, k, seed % 1000);
            let data = vec![(DVector::from_element(n, 1.0), DVector::zeros(m))];
            let w0 = l.weight().clone();
            l = l.train(&data, 3, 0.01).unwrap();
            prop_assert!(l.effective_rank() <= k);
            prop_assert_eq!(l.weight(), &w0);
        }
    }
}
