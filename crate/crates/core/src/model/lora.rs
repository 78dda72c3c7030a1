//! Low-rank adapter algebra: `y = W x + (alpha / r) B (A x)` and merging
//! the update into the frozen weight.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::ops::random_matrix;
use super::weights_file::TensorStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    /// `r x d_in`
    pub a: Array2<f64>,
    /// `d_out x r`
    pub b: Array2<f64>,
    pub alpha: f64,
}

impl LoraAdapter {
    pub fn new(a: Array2<f64>, b: Array2<f64>, alpha: f64) -> Result<Self> {
        let adapter = Self { a, b, alpha };
        adapter.validate()?;
        Ok(adapter)
    }

    /// Standard initialisation: random `A`, zero `B`, so the adapter starts
    /// as a no-op. `alpha` defaults to the rank.
    pub fn init(d_in: usize, d_out: usize, rank: usize, alpha: Option<f64>, rng: &mut impl Rng) -> Result<Self> {
        check_rank(rank, d_in, d_out)?;
        let a = random_matrix(rank, d_in, 1.0 / (d_in as f64).sqrt(), rng);
        Self::new(a, Array2::zeros((d_out, rank)), alpha.unwrap_or(rank as f64))
    }

    /// Both factors random; used to exercise the algebra with a non-trivial
    /// update.
    pub fn random(d_in: usize, d_out: usize, rank: usize, alpha: Option<f64>, rng: &mut impl Rng) -> Result<Self> {
        check_rank(rank, d_in, d_out)?;
        let a = random_matrix(rank, d_in, 1.0, rng);
        let b = random_matrix(d_out, rank, 1.0, rng);
        Self::new(a, b, alpha.unwrap_or(rank as f64))
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.a.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.b.nrows()
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.ncols() != self.a.nrows() {
            return Err(Error::shape(format!(
                "adapter factors disagree on rank: A is {:?}, B is {:?}",
                self.a.dim(),
                self.b.dim()
            )));
        }
        check_rank(self.rank(), self.d_in(), self.d_out())?;
        if !self.alpha.is_finite() {
            return Err(Error::invalid("adapter alpha must be finite"));
        }
        Ok(())
    }

    /// The effective update `(alpha / r) B A`.
    pub fn delta(&self) -> Array2<f64> {
        self.b.dot(&self.a) * self.scaling()
    }

    fn check_base(&self, w: &Array2<f64>) -> Result<()> {
        self.validate()?;
        if w.dim() != (self.d_out(), self.d_in()) {
            return Err(Error::shape(format!(
                "base weight {:?} does not match adapter ({}, {})",
                w.dim(),
                self.d_out(),
                self.d_in()
            )));
        }
        Ok(())
    }

    pub fn to_store(&self, store: &mut TensorStore, prefix: &str) {
        store.insert2(format!("{prefix}lora_a"), &self.a);
        store.insert2(format!("{prefix}lora_b"), &self.b);
        store.insert1(format!("{prefix}lora_alpha"), &Array1::from_elem(1, self.alpha));
    }

    pub fn from_store(store: &TensorStore, prefix: &str) -> Result<Self> {
        let alpha = store.get1(&format!("{prefix}lora_alpha"))?;
        if alpha.len() != 1 {
            return Err(Error::shape(format!("{prefix}lora_alpha must hold one value")));
        }
        Self::new(
            store.get2(&format!("{prefix}lora_a"))?,
            store.get2(&format!("{prefix}lora_b"))?,
            alpha[0],
        )
    }
}

fn check_rank(rank: usize, d_in: usize, d_out: usize) -> Result<()> {
    if rank == 0 || rank > d_in.min(d_out) {
        return Err(Error::invalid(format!(
            "adapter rank {rank} must be in 1..={} for a {d_out}x{d_in} weight",
            d_in.min(d_out)
        )));
    }
    Ok(())
}

pub fn lora_forward(x: &Array1<f64>, w: &Array2<f64>, adapter: &LoraAdapter) -> Result<Array1<f64>> {
    adapter.check_base(w)?;
    if x.len() != adapter.d_in() {
        return Err(Error::shape(format!(
            "input length {} does not match d_in {}",
            x.len(),
            adapter.d_in()
        )));
    }
    let low = adapter.a.dot(x);
    Ok(w.dot(x) + adapter.b.dot(&low) * adapter.scaling())
}

pub fn lora_merge(w: &Array2<f64>, adapter: &LoraAdapter) -> Result<Array2<f64>> {
    adapter.check_base(w)?;
    Ok(w + &adapter.delta())
}
