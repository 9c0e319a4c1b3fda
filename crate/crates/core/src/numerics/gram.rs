use num_complex::Complex64;

use super::cholesky::Cholesky;
use super::kron::DictionaryKron;
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Sparsity pattern of `S = (1/σ²)AᴴA + W̃⁻¹`, decided by which Kronecker
/// factor of `AᴴA` is diagonal.
///
/// Coefficients are indexed `j = q + Q·k` (column-major `vec` of the `Q×K`
/// matrix `U`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GramStructure {
    /// Both factors diagonal.
    Diagonal,
    /// Pilot Gram diagonal: `K` independent `Q×Q` blocks of contiguous indices.
    BlockDiagonal,
    /// Transform Gram diagonal: `K×K` grid of diagonal blocks, which after
    /// reordering becomes `Q` independent `K×K` blocks of stride-`Q` indices.
    DiagonalBlocks,
    Dense,
}

impl GramStructure {
    pub fn name(&self) -> &'static str {
        match self {
            GramStructure::Diagonal => "diagonal",
            GramStructure::BlockDiagonal => "block-diagonal",
            GramStructure::DiagonalBlocks => "diagonal-blocks",
            GramStructure::Dense => "dense",
        }
    }
}

/// Detects the structure of the Gram matrix for a dictionary.
pub fn gram_structure(dict: &DictionaryKron) -> GramStructure {
    match (dict.pilot_gram_is_diagonal(), dict.transform_gram_is_diagonal()) {
        (true, true) => GramStructure::Diagonal,
        (true, false) => GramStructure::BlockDiagonal,
        (false, true) => GramStructure::DiagonalBlocks,
        (false, false) => GramStructure::Dense,
    }
}

#[derive(Debug, Clone)]
struct GramBlock {
    indices: Vec<usize>,
    matrix: ComplexMatrix,
}

#[derive(Debug, Clone)]
enum Payload {
    Diagonal(Vec<f64>),
    Blocks(Vec<GramBlock>),
}

/// `S = (1/σ²)AᴴA + Diag(w)⁻¹` in structure-specific storage.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    structure: GramStructure,
    dim: usize,
    noise_variance: f64,
    payload: Payload,
}

pub(crate) fn check_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { what, value })
    }
}

fn check_weights(dict: &DictionaryKron, weights: &[f64]) -> Result<()> {
    if weights.len() != dict.num_coefficients() {
        return Err(Error::shape("gram weights", dict.num_coefficients(), weights.len()));
    }
    for &w in weights {
        check_positive("weight", w)?;
    }
    Ok(())
}

/// Builds `S` using the structure detected from the dictionary.
pub fn build_gram(dict: &DictionaryKron, weights: &[f64], sigma2: f64) -> Result<GramMatrix> {
    build_gram_as(dict, weights, sigma2, gram_structure(dict))
}

/// Builds `S` with an explicit structure.
///
/// Any class is accepted as long as it is no more specific than the detected
/// one; `Dense` always works.
pub fn build_gram_as(
    dict: &DictionaryKron,
    weights: &[f64],
    sigma2: f64,
    structure: GramStructure,
) -> Result<GramMatrix> {
    check_positive("noise variance", sigma2)?;
    check_weights(dict, weights)?;
    let detected = gram_structure(dict);
    let compatible = match structure {
        GramStructure::Dense => true,
        GramStructure::Diagonal => detected == GramStructure::Diagonal,
        GramStructure::BlockDiagonal => dict.pilot_gram_is_diagonal(),
        GramStructure::DiagonalBlocks => dict.transform_gram_is_diagonal(),
    };
    if !compatible {
        return Err(Error::shape(
            "build_gram_as structure",
            detected.name(),
            structure.name(),
        ));
    }

    let q = dict.transform_size();
    let k = dict.num_users();
    let gp = dict.pilot_gram();
    let gf = dict.transform_gram();
    let inv_s2 = 1.0 / sigma2;
    let prior = |j: usize| Complex64::new(1.0 / weights[j], 0.0);

    let payload = match structure {
        GramStructure::Diagonal => {
            let mut d = Vec::with_capacity(q * k);
            for kk in 0..k {
                let p = gp[(kk, kk)].re * inv_s2;
                for qq in 0..q {
                    d.push(p * gf[(qq, qq)].re + 1.0 / weights[qq + q * kk]);
                }
            }
            Payload::Diagonal(d)
        }
        GramStructure::BlockDiagonal => Payload::Blocks(
            (0..k)
                .map(|kk| {
                    let p = gp[(kk, kk)].re * inv_s2;
                    let indices: Vec<usize> = (0..q).map(|qq| qq + q * kk).collect();
                    let mut matrix = ComplexMatrix::from_fn(q, q, |r, c| gf[(r, c)] * p);
                    for (local, &j) in indices.iter().enumerate() {
                        matrix[(local, local)] += prior(j);
                    }
                    GramBlock { indices, matrix }
                })
                .collect(),
        ),
        GramStructure::DiagonalBlocks => Payload::Blocks(
            (0..q)
                .map(|qq| {
                    let f = gf[(qq, qq)].re * inv_s2;
                    let indices: Vec<usize> = (0..k).map(|kk| qq + q * kk).collect();
                    let mut matrix = ComplexMatrix::from_fn(k, k, |r, c| gp[(r, c)] * f);
                    for (local, &j) in indices.iter().enumerate() {
                        matrix[(local, local)] += prior(j);
                    }
                    GramBlock { indices, matrix }
                })
                .collect(),
        ),
        GramStructure::Dense => {
            let n = q * k;
            let mut matrix = ComplexMatrix::from_fn(n, n, |r, c| {
                gp[(r / q, c / q)] * gf[(r % q, c % q)] * inv_s2
            });
            for j in 0..n {
                matrix[(j, j)] += prior(j);
            }
            Payload::Blocks(vec![GramBlock {
                indices: (0..n).collect(),
                matrix,
            }])
        }
    };

    Ok(GramMatrix {
        structure,
        dim: q * k,
        noise_variance: sigma2,
        payload,
    })
}

impl GramMatrix {
    /// A diagonal `S` given directly by its entries.
    pub fn from_diagonal(diag: Vec<f64>, noise_variance: f64) -> Result<Self> {
        check_positive("noise variance", noise_variance)?;
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("GramMatrix diagonal"));
        }
        Ok(Self {
            structure: GramStructure::Diagonal,
            dim: diag.len(),
            noise_variance,
            payload: Payload::Diagonal(diag),
        })
    }

    /// A dense Hermitian `S` given directly; only the lower triangle is used.
    pub fn from_dense(matrix: ComplexMatrix, noise_variance: f64) -> Result<Self> {
        check_positive("noise variance", noise_variance)?;
        if !matrix.is_square() {
            return Err(Error::shape("GramMatrix::from_dense", "square", format!("{:?}", matrix.shape())));
        }
        let n = matrix.rows();
        Ok(Self {
            structure: GramStructure::Dense,
            dim: n,
            noise_variance,
            payload: Payload::Blocks(vec![GramBlock {
                indices: (0..n).collect(),
                matrix,
            }]),
        })
    }

    pub fn structure(&self) -> GramStructure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Number of independent diagonal blocks (1 for `Dense`, `dim` for `Diagonal`).
    pub fn num_blocks(&self) -> usize {
        match &self.payload {
            Payload::Diagonal(d) => d.len(),
            Payload::Blocks(b) => b.len(),
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        match &self.payload {
            Payload::Diagonal(d) => {
                for (j, &v) in d.iter().enumerate() {
                    out[(j, j)] = Complex64::new(v, 0.0);
                }
            }
            Payload::Blocks(blocks) => {
                for b in blocks {
                    for (lc, &c) in b.indices.iter().enumerate() {
                        for (lr, &r) in b.indices.iter().enumerate() {
                            out[(r, c)] = b.matrix[(lr, lc)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Factors every block once; the result serves solves, the inverse
    /// diagonal and the log-determinant.
    pub fn factor(&self) -> Result<GramFactor> {
        let inner = match &self.payload {
            Payload::Diagonal(d) => {
                for (index, &v) in d.iter().enumerate() {
                    if !(v > 0.0) {
                        return Err(Error::Conditioning { index, pivot: v });
                    }
                }
                FactorPayload::Diagonal(d.clone())
            }
            Payload::Blocks(blocks) => FactorPayload::Blocks(
                blocks
                    .iter()
                    .map(|b| {
                        Cholesky::factor(&b.matrix)
                            .map(|ch| (b.indices.clone(), ch))
                            .map_err(|e| match e {
                                Error::Conditioning { index, pivot } => Error::Conditioning {
                                    index: b.indices[index],
                                    pivot,
                                },
                                other => other,
                            })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(GramFactor {
            dim: self.dim,
            inner,
        })
    }
}

#[derive(Debug, Clone)]
enum FactorPayload {
    Diagonal(Vec<f64>),
    Blocks(Vec<(Vec<usize>, Cholesky)>),
}

/// Factored form of a [`GramMatrix`].
#[derive(Debug, Clone)]
pub struct GramFactor {
    dim: usize,
    inner: FactorPayload,
}

impl GramFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if rhs.len() != self.dim {
            return Err(Error::shape("solve_gram", self.dim, rhs.len()));
        }
        Ok(match &self.inner {
            FactorPayload::Diagonal(d) => rhs.iter().zip(d).map(|(b, s)| b / s).collect(),
            FactorPayload::Blocks(blocks) => {
                let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
                let mut local = Vec::new();
                for (indices, ch) in blocks {
                    local.clear();
                    local.extend(indices.iter().map(|&j| rhs[j]));
                    ch.solve_in_place(&mut local);
                    for (&j, v) in indices.iter().zip(&local) {
                        out[j] = *v;
                    }
                }
                out
            }
        })
    }

    pub fn inverse_diagonal(&self) -> Vec<f64> {
        match &self.inner {
            FactorPayload::Diagonal(d) => d.iter().map(|s| 1.0 / s).collect(),
            FactorPayload::Blocks(blocks) => {
                let mut out = vec![0.0; self.dim];
                for (indices, ch) in blocks {
                    for (&j, v) in indices.iter().zip(ch.inverse_diagonal()) {
                        out[j] = v;
                    }
                }
                out
            }
        }
    }

    pub fn log_det(&self) -> f64 {
        match &self.inner {
            FactorPayload::Diagonal(d) => d.iter().map(|s| s.ln()).sum(),
            FactorPayload::Blocks(blocks) => blocks.iter().map(|(_, ch)| ch.log_det()).sum(),
        }
    }
}

/// `S⁻¹ · rhs`.
pub fn solve_gram(gram: &GramMatrix, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    gram.factor()?.solve(rhs)
}

/// Real diagonal of `S⁻¹`.
pub fn diag_of_gram_inverse(gram: &GramMatrix) -> Result<Vec<f64>> {
    Ok(gram.factor()?.inverse_diagonal())
}
