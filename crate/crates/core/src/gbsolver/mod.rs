//! Elimination-template engine.
//!
//! A polynomial system `p₁ = … = p_n = h = 0`, with `h` the sphere
//! constraint on `u`, is solved by
//!
//! 1. multiplying each generator by a fixed set of monomials,
//! 2. reducing every product modulo `h` (which removes all monomials
//!    divisible by `α²`),
//! 3. Gauss–Jordan elimination of the resulting coefficient matrix,
//! 4. reading the quotient-ring basis off the non-pivot columns and building
//!    the matrix of multiplication by `γ`,
//! 5. recovering `u` from the real eigenvectors of that matrix.
//!
//! Step 2 is the block elimination of the full template with the `h`
//! multiples as pivot rows; [`schur_complement_template`] computes the same
//! matrix the long way and is kept as an independent check.

pub mod eigen;

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector3};

pub use eigen::{eigensolve_real, EigenPair, IMAG_TOL};

use crate::error::{Error, Result};
use crate::geom::RotationConstraint;
use crate::poly::{reduce_mod_h, sphere_polynomial, DensePolynomial, GrevlexBasis, Monomial};

/// Relative pivot threshold used by the solvers.
pub const PIVOT_TOL: f64 = 1e-10;

/// Tolerance of the root consistency filter.
pub const ROOT_TOL: f64 = 1e-6;

/// Template rows for the 4-point problem: `α f`, `β f`, `γ f` and `f` for
/// `f₁ … f₄` (16 rows at degree 5).
pub const REGULAR_DEGREE: usize = 5;
pub const REGULAR_QUOTIENT_SIZE: usize = 20;

/// Template rows for the generalized problem: `n g` for
/// `n ∈ {β², αγ, βγ, γ², α, β, γ}` and `g₁ … g₅`, plus `g₁` and `g₂`
/// (37 rows at degree 8).
pub const GENERALIZED_DEGREE: usize = 8;
pub const GENERALIZED_QUOTIENT_SIZE: usize = 44;

/// One template row: `multiplier * generators[generator]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateRow {
    pub multiplier: Monomial,
    pub generator: usize,
}

pub fn regular_row_spec() -> Vec<TemplateRow> {
    let mults = [Monomial::ALPHA, Monomial::BETA, Monomial::GAMMA, Monomial::ONE];
    mults
        .iter()
        .flat_map(|&m| (0..4).map(move |g| TemplateRow { multiplier: m, generator: g }))
        .collect()
}

pub fn generalized_row_spec() -> Vec<TemplateRow> {
    let mults = [
        Monomial::new(0, 2, 0),
        Monomial::new(1, 0, 1),
        Monomial::new(0, 1, 1),
        Monomial::new(0, 0, 2),
        Monomial::ALPHA,
        Monomial::BETA,
        Monomial::GAMMA,
    ];
    let mut rows: Vec<_> = mults
        .iter()
        .flat_map(|&m| (0..5).map(move |g| TemplateRow { multiplier: m, generator: g }))
        .collect();
    rows.extend((0..2).map(|g| TemplateRow {
        multiplier: Monomial::ONE,
        generator: g,
    }));
    rows
}

/// Coefficient matrix of the reduced template over the remainder block.
#[derive(Debug, Clone)]
pub struct EliminationTemplate {
    pub matrix: DMatrix<f64>,
    pub rows: Vec<TemplateRow>,
    /// Column monomials, descending grevlex, all of `α`-degree at most one.
    pub columns: Vec<Monomial>,
    pub degree: usize,
}

impl EliminationTemplate {
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
}

fn product_row(
    generators: &[DensePolynomial],
    row: &TemplateRow,
    basis: &std::sync::Arc<GrevlexBasis>,
) -> Result<DensePolynomial> {
    let g = generators.get(row.generator).ok_or_else(|| {
        Error::Validation(format!("template row refers to missing generator {}", row.generator))
    })?;
    let needed = g.degree() + row.multiplier.degree();
    if needed > basis.max_degree() {
        return Err(Error::DegreeOverflow {
            needed,
            available: basis.max_degree(),
        });
    }
    g.shifted(&row.multiplier, basis.clone())
}

/// Builds the reduced template: each row is `reduce_mod_h(multiplier * g)`
/// restricted to the monomials of `α`-degree at most one.
pub fn assemble_reduced_template(
    generators: &[DensePolynomial],
    rows: &[TemplateRow],
    target_degree: usize,
    c: &RotationConstraint,
) -> Result<EliminationTemplate> {
    let basis = GrevlexBasis::shared(target_degree);
    let columns = basis.remainder_block();
    let mut col_of = vec![usize::MAX; basis.len()];
    for (j, m) in columns.iter().enumerate() {
        col_of[basis.index_of(m).expect("in basis")] = j;
    }
    let mut matrix = DMatrix::zeros(rows.len(), columns.len());
    for (r, row) in rows.iter().enumerate() {
        let reduced = reduce_mod_h(&product_row(generators, row, &basis)?, c);
        for (k, &v) in reduced.coeffs().iter().enumerate() {
            if v != 0.0 {
                debug_assert!(col_of[k] != usize::MAX);
                matrix[(r, col_of[k])] = v;
            }
        }
    }
    Ok(EliminationTemplate {
        matrix,
        rows: rows.to_vec(),
        columns,
        degree: target_degree,
    })
}

/// Full template `[U V; W X]`: rows `m h` for every `m` with `α² m` in the
/// basis (in the order of the `α²` block), followed by the generator
/// multiples; columns are the `α²` block followed by the remainder block.
pub fn full_template(
    generators: &[DensePolynomial],
    rows: &[TemplateRow],
    target_degree: usize,
    c: &RotationConstraint,
) -> Result<DMatrix<f64>> {
    let basis = GrevlexBasis::shared(target_degree);
    let alpha2 = basis.alpha2_block();
    let rem = basis.remainder_block();
    let mut col_of = vec![0usize; basis.len()];
    for (j, m) in alpha2.iter().chain(rem.iter()).enumerate() {
        col_of[basis.index_of(m).expect("in basis")] = j;
    }
    let h = sphere_polynomial(c, GrevlexBasis::shared(2));
    let mut polys = Vec::with_capacity(alpha2.len() + rows.len());
    for m in &alpha2 {
        let shift = Monomial::new(m.exps[0] - 2, m.exps[1], m.exps[2]);
        polys.push(h.shifted(&shift, basis.clone())?);
    }
    for row in rows {
        polys.push(product_row(generators, row, &basis)?);
    }
    let mut a = DMatrix::zeros(polys.len(), basis.len());
    for (r, p) in polys.iter().enumerate() {
        for (k, &v) in p.coeffs().iter().enumerate() {
            a[(r, col_of[k])] = v;
        }
    }
    Ok(a)
}

/// `X − W U⁻¹ V` computed from the full template.
pub fn schur_complement_template(
    generators: &[DensePolynomial],
    rows: &[TemplateRow],
    target_degree: usize,
    c: &RotationConstraint,
) -> Result<DMatrix<f64>> {
    let a = full_template(generators, rows, target_degree, c)?;
    let n = GrevlexBasis::shared(target_degree).alpha2_block().len();
    let (nr, nc) = a.shape();
    let u = a.view((0, 0), (n, n)).into_owned();
    let v = a.view((0, n), (n, nc - n)).into_owned();
    let w = a.view((n, 0), (nr - n, n)).into_owned();
    let x = a.view((n, n), (nr - n, nc - n)).into_owned();
    let uinv_v = u
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Validation("upper block is singular".into()))?;
    Ok(x - w * uinv_v)
}

/// Largest elementwise difference between the reduced 4-point template and
/// its explicit block elimination.
pub fn schur_equivalence_check(
    generators: &[DensePolynomial; 4],
    c: &RotationConstraint,
) -> Result<f64> {
    let rows = regular_row_spec();
    let reduced = assemble_reduced_template(generators, &rows, REGULAR_DEGREE, c)?;
    let schur = schur_complement_template(generators, &rows, REGULAR_DEGREE, c)?;
    Ok((reduced.matrix - schur).amax())
}

/// Gauss–Jordan elimination with partial pivoting.
///
/// A pivot is accepted only if its magnitude exceeds `pivot_tol` times the
/// max-norm of its row; columns without an acceptable pivot are skipped.
/// Returns the reduced matrix and the pivot columns.
pub fn rref(b: &DMatrix<f64>, pivot_tol: f64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let mut m = b.clone();
    let (nr, nc) = m.shape();
    let mut pivots = Vec::with_capacity(nr);
    let mut r = 0;
    for col in 0..nc {
        if r == nr {
            break;
        }
        let mut best = r;
        let mut best_val = 0.0;
        for i in r..nr {
            let v = m[(i, col)].abs();
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        let row_max = m.row(best).amax();
        if best_val == 0.0 || best_val <= pivot_tol * row_max {
            continue;
        }
        m.swap_rows(r, best);
        let p = m[(r, col)];
        m.row_mut(r).scale_mut(1.0 / p);
        m[(r, col)] = 1.0;
        for i in 0..nr {
            if i == r {
                continue;
            }
            let f = m[(i, col)];
            if f != 0.0 {
                for j in col..nc {
                    let delta = f * m[(r, j)];
                    m[(i, j)] -= delta;
                }
                m[(i, col)] = 0.0;
            }
        }
        pivots.push(col);
        r += 1;
    }
    if pivots.len() < nr {
        return Err(Error::RankDeficient {
            pivots: pivots.len(),
            rows: nr,
        });
    }
    Ok((m, pivots))
}

/// Standard monomials of the quotient ring, in template column order
/// (descending grevlex).
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientBasis {
    pub monomials: Vec<Monomial>,
    position: HashMap<Monomial, usize>,
}

impl QuotientBasis {
    pub fn new(monomials: Vec<Monomial>) -> Self {
        let position = monomials.iter().enumerate().map(|(k, m)| (*m, k)).collect();
        Self {
            monomials,
            position,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn position(&self, m: &Monomial) -> Option<usize> {
        self.position.get(m).copied()
    }

    fn require(&self, m: &Monomial) -> usize {
        self.position(m).expect("checked at construction")
    }
}

/// Non-pivot columns of a reduced template as a quotient basis.
pub fn quotient_basis_from_pivots(
    columns: &[Monomial],
    pivots: &[usize],
    expected: usize,
) -> Result<QuotientBasis> {
    let mut is_pivot = vec![false; columns.len()];
    for &p in pivots {
        is_pivot[p] = true;
    }
    let monos: Vec<_> = columns
        .iter()
        .zip(is_pivot)
        .filter(|(_, p)| !p)
        .map(|(m, _)| *m)
        .collect();
    if monos.len() != expected {
        return Err(Error::BasisAnomaly(format!(
            "expected {expected} standard monomials, found {}",
            monos.len()
        )));
    }
    let qb = QuotientBasis::new(monos);
    for m in [Monomial::ONE, Monomial::ALPHA, Monomial::BETA, Monomial::GAMMA] {
        if qb.position(&m).is_none() {
            return Err(Error::BasisAnomaly(format!("{m} is not a standard monomial")));
        }
    }
    Ok(qb)
}

/// How a row of the action matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionRow {
    /// `γ b` is itself standard; a single 1 at this column.
    Unit(usize),
    /// `γ b` is the leading monomial of this row of the reduced template.
    Reduced(usize),
}

/// Matrix of multiplication by `γ` in the quotient ring: row `k` expresses
/// `γ · b_k` in the basis, so the vector of basis monomials evaluated at a
/// root is a right eigenvector with eigenvalue `γ`.
#[derive(Debug, Clone)]
pub struct ActionMatrix {
    pub matrix: DMatrix<f64>,
    pub rows: Vec<ActionRow>,
}

/// Builds the action matrix from an RREF template `[I C]` (with pivots
/// possibly interleaved).
pub fn build_action_matrix(
    reduced: &DMatrix<f64>,
    columns: &[Monomial],
    pivots: &[usize],
    qb: &QuotientBasis,
) -> Result<ActionMatrix> {
    let n = qb.len();
    let pivot_row: HashMap<Monomial, usize> =
        pivots.iter().enumerate().map(|(r, &c)| (columns[c], r)).collect();
    let std_cols: Vec<usize> = qb
        .monomials
        .iter()
        .map(|m| columns.iter().position(|x| x == m).expect("standard monomial is a column"))
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut rows = Vec::with_capacity(n);
    for (k, b) in qb.monomials.iter().enumerate() {
        let target = b.mul(&Monomial::GAMMA);
        if let Some(j) = qb.position(&target) {
            matrix[(k, j)] = 1.0;
            rows.push(ActionRow::Unit(j));
        } else if let Some(&r) = pivot_row.get(&target) {
            for (j, &col) in std_cols.iter().enumerate() {
                matrix[(k, j)] = -reduced[(r, col)];
            }
            rows.push(ActionRow::Reduced(r));
        } else {
            return Err(Error::UnreachableMonomial(target.to_string()));
        }
    }
    Ok(ActionMatrix { matrix, rows })
}

/// Outcome of reading roots off the eigenvectors.
#[derive(Debug, Clone, Default)]
pub struct RootExtraction {
    pub roots: Vec<Vector3<f64>>,
    /// Candidates rejected by the consistency filter (including solutions
    /// at infinity).
    pub dropped: usize,
}

/// Reads `u = (α, β, γ)` off each eigenvector after scaling its entry at
/// monomial `1` to one, keeping only candidates whose eigenvalue matches the
/// `γ` entry and whose degree-2 entries match products of the linear ones.
pub fn extract_roots(pairs: &[EigenPair], qb: &QuotientBasis) -> RootExtraction {
    let one = qb.require(&Monomial::ONE);
    let ia = qb.require(&Monomial::ALPHA);
    let ib = qb.require(&Monomial::BETA);
    let ig = qb.require(&Monomial::GAMMA);
    let quadratic: Vec<(usize, Monomial)> = qb
        .monomials
        .iter()
        .enumerate()
        .filter(|(_, m)| m.degree() == 2)
        .map(|(k, m)| (k, *m))
        .collect();

    let mut out = RootExtraction::default();
    for p in pairs {
        let v = &p.vector;
        if v[one].abs() <= 1e-12 * v.amax() {
            out.dropped += 1;
            continue;
        }
        let v = v / v[one];
        let u = Vector3::new(v[ia], v[ib], v[ig]);
        let mut consistent = (p.value - u.z).abs() <= ROOT_TOL * (1.0 + p.value.abs());
        for (k, m) in &quadratic {
            if !consistent {
                break;
            }
            consistent = (v[*k] - m.eval(&u)).abs() <= ROOT_TOL * (1.0 + v[*k].abs());
        }
        if consistent && u.iter().all(|x| x.is_finite()) {
            out.roots.push(u);
        } else {
            out.dropped += 1;
        }
    }
    out
}

/// Diagnostics of one run of the elimination pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemDiagnostics {
    pub template_shape: (usize, usize),
    pub quotient_size: usize,
    pub real_eigenpairs: usize,
    pub dropped_roots: usize,
}

#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub roots: Vec<Vector3<f64>>,
    pub diagnostics: SystemDiagnostics,
}

/// Runs the whole pipeline for one polynomial system.
pub fn solve_system(
    generators: &[DensePolynomial],
    rows: &[TemplateRow],
    target_degree: usize,
    expected_quotient: usize,
    c: &RotationConstraint,
) -> Result<SystemSolution> {
    let template = assemble_reduced_template(generators, rows, target_degree, c)?;
    let mut scaled = template.matrix.clone();
    for mut row in scaled.row_iter_mut() {
        let s = row.amax();
        if s > 0.0 {
            row /= s;
        }
    }
    let (reduced, pivots) = rref(&scaled, PIVOT_TOL)?;
    let qb = quotient_basis_from_pivots(&template.columns, &pivots, expected_quotient)?;
    let action = build_action_matrix(&reduced, &template.columns, &pivots, &qb)?;
    let pairs = eigensolve_real(&action.matrix)?;
    let extraction = extract_roots(&pairs, &qb);
    Ok(SystemSolution {
        diagnostics: SystemDiagnostics {
            template_shape: template.shape(),
            quotient_size: qb.len(),
            real_eigenpairs: pairs.len(),
            dropped_roots: extraction.dropped,
        },
        roots: extraction.roots,
    })
}
