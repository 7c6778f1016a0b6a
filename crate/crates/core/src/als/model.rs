use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, dim_err, Result};
use crate::matrix::Matrix;
use crate::tensor::{superdiagonal_core, tucker_reconstruct, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModelKind {
    /// Superdiagonal core; the core is never re-estimated.
    Cp,
    Tucker3,
}

/// Latent dimensions `(R1, R2, R3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ranks(pub usize, pub usize, pub usize);

impl Ranks {
    pub const fn cp(r: usize) -> Self {
        Ranks(r, r, r)
    }

    pub fn is_cubic(&self) -> bool {
        self.0 == self.1 && self.1 == self.2
    }
}

/// The factor blocks updated by the ALS sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Block {
    A,
    B,
    C,
    D,
    Core,
}

/// Factors of the coupled model `T ~ G x1 A x2 B x3 C`, `Y ~ A D^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub core: Tensor3,
    pub kind: ModelKind,
}

impl FactorModel {
    pub fn ranks(&self) -> Ranks {
        let (r1, r2, r3) = self.core.dims();
        Ranks(r1, r2, r3)
    }

    /// `(I, J, K, F)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.a.rows(), self.b.rows(), self.c.rows(), self.d.rows())
    }

    pub fn validate(&self) -> Result<()> {
        let Ranks(r1, r2, r3) = self.ranks();
        if self.a.cols() != r1 || self.b.cols() != r2 || self.c.cols() != r3 || self.d.cols() != r1 {
            return Err(dim_err!(
                "factor widths A:{} B:{} C:{} D:{} do not match core {:?}",
                self.a.cols(),
                self.b.cols(),
                self.c.cols(),
                self.d.cols(),
                self.core.dims()
            ));
        }
        if self.kind == ModelKind::Cp {
            if !self.ranks().is_cubic() {
                return Err(config_err!("CP models need equal ranks, got {:?}", self.ranks()));
            }
            let (r, _, _) = self.core.dims();
            for k in 0..r {
                for j in 0..r {
                    for i in 0..r {
                        if !(i == j && j == k) && self.core.get(i, j, k) != 0.0 {
                            return Err(config_err!("CP core has a nonzero off-superdiagonal entry"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The tensor part of the model.
    pub fn reconstruct(&self) -> Tensor3 {
        tucker_reconstruct(&self.core, &self.a, &self.b, &self.c).expect("validated model")
    }

    /// The side-matrix part of the model, `A D^T`.
    pub fn reconstruct_side(&self) -> Matrix {
        self.a.matmul(&self.d.transpose()).expect("validated model")
    }

    pub fn factor(&self, block: Block) -> Option<&Matrix> {
        match block {
            Block::A => Some(&self.a),
            Block::B => Some(&self.b),
            Block::C => Some(&self.c),
            Block::D => Some(&self.d),
            Block::Core => None,
        }
    }
}

/// Random non-negative starting model. Entries of `A`, `B`, `C`, `D` (in
/// that order, row-major) and then of the core are drawn i.i.d. uniform on
/// `[0, 1)` from a ChaCha8 stream seeded with `seed`. A CP core draws only
/// its `R` superdiagonal weights.
pub fn init_factors(
    dims: (usize, usize, usize, usize),
    ranks: Ranks,
    kind: ModelKind,
    seed: u64,
) -> Result<FactorModel> {
    let (i, j, k, f) = dims;
    let Ranks(r1, r2, r3) = ranks;
    if r1 == 0 || r2 == 0 || r3 == 0 {
        return Err(config_err!("ranks must be >= 1, got {:?}", ranks));
    }
    if r1 > i || r2 > j || r3 > k {
        return Err(config_err!("ranks {:?} exceed tensor dimensions ({i}, {j}, {k})", ranks));
    }
    if kind == ModelKind::Cp && !ranks.is_cubic() {
        return Err(config_err!("CP models need equal ranks, got {:?}", ranks));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| -> Matrix {
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Matrix::new(rows, cols, values).expect("finite draws")
    };
    let a = draw(i, r1);
    let b = draw(j, r2);
    let c = draw(k, r3);
    let d = draw(f, r1);
    let core = match kind {
        ModelKind::Cp => {
            let w: Vec<f64> = (0..r1).map(|_| rng.random::<f64>()).collect();
            superdiagonal_core(&w)
        }
        ModelKind::Tucker3 => {
            let values: Vec<f64> = (0..r1 * r2 * r3).map(|_| rng.random::<f64>()).collect();
            Tensor3::new((r1, r2, r3), values).expect("finite draws")
        }
    };
    Ok(FactorModel { a, b, c, d, core, kind })
}
