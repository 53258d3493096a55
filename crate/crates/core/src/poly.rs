//! Dense polynomials in the quaternion vector part `u = (α, β, γ)`.
//!
//! Every polynomial lives on a [`GrevlexBasis`]: all monomials up to a fixed
//! total degree, sorted in descending graded reverse lexicographic order
//! with `α > β > γ`. Coefficient vectors are dense and aligned to that
//! order, so coefficient `k` of a degree-4 polynomial is the `k`-th entry
//! of `α⁴, α³β, α²β², αβ³, β⁴, α³γ, …, γ, 1`.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{BearingPair, PluckerPair, RotationConstraint};

/// Cross products shorter than this mean two rays coincide.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// Largest basis degree kept in the shared cache.
const MAX_CACHED_DEGREE: usize = 12;

/// `α^a β^b γ^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub exps: [u8; 3],
}

impl Monomial {
    pub const ONE: Monomial = Monomial { exps: [0, 0, 0] };
    pub const ALPHA: Monomial = Monomial { exps: [1, 0, 0] };
    pub const BETA: Monomial = Monomial { exps: [0, 1, 0] };
    pub const GAMMA: Monomial = Monomial { exps: [0, 0, 1] };

    pub const fn new(a: u8, b: u8, c: u8) -> Self {
        Self { exps: [a, b, c] }
    }

    pub fn degree(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    pub fn alpha_degree(&self) -> u8 {
        self.exps[0]
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::new(
            self.exps[0] + other.exps[0],
            self.exps[1] + other.exps[1],
            self.exps[2] + other.exps[2],
        )
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.exps.iter().zip(other.exps.iter()).all(|(a, b)| a <= b)
    }

    pub fn eval(&self, u: &Vector3<f64>) -> f64 {
        u.x.powi(self.exps[0] as i32) * u.y.powi(self.exps[1] as i32) * u.z.powi(self.exps[2] as i32)
    }
}

/// Graded reverse lexicographic comparison with `α > β > γ`.
pub fn grevlex_compare(m1: &Monomial, m2: &Monomial) -> Ordering {
    match m1.degree().cmp(&m2.degree()) {
        Ordering::Equal => {}
        ord => return ord,
    }
    // the monomial with the smaller exponent in the last differing
    // variable is the larger one
    for v in (0..3).rev() {
        match m1.exps[v].cmp(&m2.exps[v]) {
            Ordering::Equal => continue,
            ord => return ord.reverse(),
        }
    }
    Ordering::Equal
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        grevlex_compare(self, other)
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Monomial::ONE {
            return write!(f, "1");
        }
        let mut first = true;
        for (name, &e) in ["alpha", "beta", "gamma"].iter().zip(self.exps.iter()) {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "{name}")?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials of total degree `<= max_degree` in descending grevlex
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct GrevlexBasis {
    max_degree: usize,
    monomials: Vec<Monomial>,
    lookup: Vec<u32>,
}

impl GrevlexBasis {
    pub fn new(max_degree: usize) -> Self {
        let mut monomials = Vec::new();
        for deg in (0..=max_degree).rev() {
            for c in 0..=deg {
                for b in 0..=(deg - c) {
                    let a = deg - b - c;
                    monomials.push(Monomial::new(a as u8, b as u8, c as u8));
                }
            }
        }
        monomials.sort_by(|x, y| y.cmp(x));
        let side = max_degree + 1;
        let mut lookup = vec![u32::MAX; side * side * side];
        for (k, m) in monomials.iter().enumerate() {
            let [a, b, c] = m.exps;
            lookup[(a as usize * side + b as usize) * side + c as usize] = k as u32;
        }
        Self {
            max_degree,
            monomials,
            lookup,
        }
    }

    /// Process-wide shared basis of the given degree.
    pub fn shared(max_degree: usize) -> Arc<GrevlexBasis> {
        static CACHE: OnceLock<Vec<Arc<GrevlexBasis>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| {
            (0..=MAX_CACHED_DEGREE)
                .map(|d| Arc::new(GrevlexBasis::new(d)))
                .collect()
        });
        match cache.get(max_degree) {
            Some(b) => b.clone(),
            None => Arc::new(GrevlexBasis::new(max_degree)),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        if m.degree() > self.max_degree {
            return None;
        }
        let side = self.max_degree + 1;
        let [a, b, c] = m.exps;
        match self.lookup[(a as usize * side + b as usize) * side + c as usize] {
            u32::MAX => None,
            k => Some(k as usize),
        }
    }

    /// Monomials divisible by `α²`, descending.
    pub fn alpha2_block(&self) -> Vec<Monomial> {
        self.monomials
            .iter()
            .copied()
            .filter(|m| m.alpha_degree() >= 2)
            .collect()
    }

    /// Monomials of `α`-degree at most one, descending.
    pub fn remainder_block(&self) -> Vec<Monomial> {
        self.monomials
            .iter()
            .copied()
            .filter(|m| m.alpha_degree() < 2)
            .collect()
    }
}

/// Coefficient vector over a [`GrevlexBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensePolynomial {
    basis: Arc<GrevlexBasis>,
    coeffs: Vec<f64>,
}

impl DensePolynomial {
    pub fn zero(basis: Arc<GrevlexBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_terms(basis: Arc<GrevlexBasis>, terms: &[(Monomial, f64)]) -> Result<Self> {
        let mut p = Self::zero(basis);
        for (m, v) in terms {
            p.add_term(m, *v)?;
        }
        Ok(p)
    }

    pub fn basis(&self) -> &Arc<GrevlexBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.basis.index_of(m).map_or(0.0, |k| self.coeffs[k])
    }

    pub fn add_term(&mut self, m: &Monomial, v: f64) -> Result<()> {
        let k = self.basis.index_of(m).ok_or(Error::DegreeOverflow {
            needed: m.degree(),
            available: self.basis.max_degree(),
        })?;
        self.coeffs[k] += v;
        Ok(())
    }

    /// Highest total degree carrying a nonzero coefficient (0 for the zero
    /// polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .zip(self.basis.monomials())
            .filter(|(c, _)| **c != 0.0)
            .map(|(_, m)| m.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn eval(&self, u: &Vector3<f64>) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.monomials())
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, m)| c * m.eval(u))
            .sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, f64)> + '_ {
        self.basis
            .monomials()
            .iter()
            .zip(self.coeffs.iter())
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| (*m, *c))
    }

    /// Re-expresses the polynomial on another basis.
    pub fn embed(&self, basis: Arc<GrevlexBasis>) -> Result<Self> {
        let mut out = Self::zero(basis);
        for (m, c) in self.terms() {
            out.add_term(&m, c)?;
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`; both must share a basis degree.
    pub fn add_scaled(&self, other: &DensePolynomial, s: f64) -> Self {
        assert_eq!(self.basis.max_degree(), other.basis.max_degree());
        Self {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(other.coeffs.iter())
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// Product of a monomial with the polynomial.
    pub fn shifted(&self, m: &Monomial, out_basis: Arc<GrevlexBasis>) -> Result<Self> {
        let mut out = Self::zero(out_basis);
        for (n, c) in self.terms() {
            out.add_term(&n.mul(m), c)?;
        }
        Ok(out)
    }
}

/// Exact product of two polynomials on `out_basis`.
pub fn poly_mul(
    p: &DensePolynomial,
    q: &DensePolynomial,
    out_basis: Arc<GrevlexBasis>,
) -> Result<DensePolynomial> {
    let needed = p.degree() + q.degree();
    if needed > out_basis.max_degree() {
        return Err(Error::DegreeOverflow {
            needed,
            available: out_basis.max_degree(),
        });
    }
    let mut out = DensePolynomial::zero(out_basis);
    let qt: Vec<_> = q.terms().collect();
    for (m1, c1) in p.terms() {
        for (m2, c2) in &qt {
            let k = out.basis.index_of(&m1.mul(m2)).expect("degree checked");
            out.coeffs[k] += c1 * c2;
        }
    }
    Ok(out)
}

/// Rewrites `p` modulo `h = α² + β² + γ² + τ` until no monomial is divisible
/// by `α²`; the result is supported on the remainder block and agrees with
/// `p` on the constraint sphere.
pub fn reduce_mod_h(p: &DensePolynomial, c: &RotationConstraint) -> DensePolynomial {
    let mut out = p.clone();
    let basis = p.basis.clone();
    // α²m is larger than β²m, γ²m and m, so one descending sweep suffices.
    for k in 0..basis.len() {
        let m = basis.monomials()[k];
        let v = out.coeffs[k];
        if m.alpha_degree() < 2 || v == 0.0 {
            continue;
        }
        out.coeffs[k] = 0.0;
        let base = Monomial::new(m.exps[0] - 2, m.exps[1], m.exps[2]);
        let b2 = basis.index_of(&base.mul(&Monomial::new(0, 2, 0))).expect("same degree");
        let g2 = basis.index_of(&base.mul(&Monomial::new(0, 0, 2))).expect("same degree");
        let b0 = basis.index_of(&base).expect("lower degree");
        out.coeffs[b2] -= v;
        out.coeffs[g2] -= v;
        out.coeffs[b0] -= c.tau * v;
    }
    out
}

/// The constraint polynomial `h = |u|² + σ² − 1` on a basis of the given
/// degree.
pub fn sphere_polynomial(c: &RotationConstraint, basis: Arc<GrevlexBasis>) -> DensePolynomial {
    DensePolynomial::from_terms(
        basis,
        &[
            (Monomial::new(2, 0, 0), 1.0),
            (Monomial::new(0, 2, 0), 1.0),
            (Monomial::new(0, 0, 2), 1.0),
            (Monomial::ONE, c.tau),
        ],
    )
    .expect("degree >= 2")
}

/// `bᵀ R(u) a` as a quadratic polynomial in `u`, with `R` in the
/// quaternion form fixed by `c`.
pub fn rotation_bilinear_form(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &RotationConstraint,
) -> DensePolynomial {
    let basis = GrevlexBasis::shared(2);
    let mut p = DensePolynomial::zero(basis.clone());
    let s = c.sigma;
    let idx = |m: Monomial| basis.index_of(&m).unwrap();
    p.coeffs[idx(Monomial::ONE)] = (2.0 * s * s - 1.0) * b.dot(a);
    // −2σ bᵀ[u]×a = −2σ uᵀ(a × b)
    let axb = a.cross(b);
    let unit = [Monomial::ALPHA, Monomial::BETA, Monomial::GAMMA];
    for v in 0..3 {
        p.coeffs[idx(unit[v])] -= 2.0 * s * axb[v];
    }
    // 2 (bᵀu)(uᵀa)
    for i in 0..3 {
        for j in 0..3 {
            p.coeffs[idx(unit[i].mul(&unit[j]))] += 2.0 * b[i] * a[j];
        }
    }
    p
}

fn checked_cross(x: &Vector3<f64>, y: &Vector3<f64>, what: &str) -> Result<Vector3<f64>> {
    let p = x.cross(y);
    if p.norm() < COINCIDENT_EPS {
        return Err(Error::DegenerateInput(format!("coincident rays ({what})")));
    }
    Ok(p)
}

/// The 2×2 matrix `F_ijk` whose determinant vanishes for the admissible
/// rotations of a central camera pair.
#[derive(Debug, Clone)]
pub struct FMatrix {
    pub anchor: usize,
    pub free: (usize, usize),
    pub entries: [[DensePolynomial; 2]; 2],
}

impl FMatrix {
    pub fn new(
        pairs: &[BearingPair],
        i: usize,
        j: usize,
        k: usize,
        c: &RotationConstraint,
    ) -> Result<Self> {
        let row = |j: usize| -> Result<[DensePolynomial; 2]> {
            let p1 = checked_cross(&pairs[i].q1, &pairs[j].q1, "first view")?;
            let p2 = checked_cross(&pairs[i].q2, &pairs[j].q2, "second view")?;
            Ok([
                rotation_bilinear_form(&p1, &pairs[j].q2, c),
                rotation_bilinear_form(&pairs[j].q1, &p2, c),
            ])
        };
        Ok(Self {
            anchor: i,
            free: (j, k),
            entries: [row(j)?, row(k)?],
        })
    }

    pub fn det(&self) -> DensePolynomial {
        let b = GrevlexBasis::shared(4);
        let [[a, bb], [cc, d]] = &self.entries;
        let ad = poly_mul(a, d, b.clone()).expect("quadratic entries");
        let bc = poly_mul(bb, cc, b).expect("quadratic entries");
        ad.add_scaled(&bc, -1.0)
    }

    pub fn eval(&self, u: &Vector3<f64>) -> Matrix2<f64> {
        let e = &self.entries;
        Matrix2::new(e[0][0].eval(u), e[0][1].eval(u), e[1][0].eval(u), e[1][1].eval(u))
    }
}

/// Index triple of `f_m`: the three correspondences other than `m` in
/// cyclic order, rotated so that `anchor` leads whenever it is present.
pub fn f_triple(m: usize, anchor: usize) -> [usize; 3] {
    let mut t = [(m + 1) % 4, (m + 2) % 4, (m + 3) % 4];
    if let Some(pos) = t.iter().position(|&x| x == anchor) {
        t.rotate_left(pos);
    }
    t
}

/// The four quartics `f_m = det F` over the triples that exclude
/// correspondence `m` (`f₁ = det F₂₃₄`, …, `f₄ = det F₁₂₃`).
pub fn build_f_polynomials(
    pairs: &[BearingPair; 4],
    c: &RotationConstraint,
) -> Result<[DensePolynomial; 4]> {
    let mut out = Vec::with_capacity(4);
    for m in 0..4 {
        let [i, j, k] = [(m + 1) % 4, (m + 2) % 4, (m + 3) % 4];
        out.push(FMatrix::new(pairs, i, j, k, c)?.det());
    }
    Ok(out.try_into().expect("four polynomials"))
}

/// Same system as [`build_f_polynomials`], but each triple is rotated to
/// start at `anchor` when it contains it. The polynomials agree with the
/// default ones modulo the sphere constraint.
pub fn build_f_polynomials_anchored(
    pairs: &[BearingPair; 4],
    c: &RotationConstraint,
    anchor: usize,
) -> Result<[DensePolynomial; 4]> {
    let mut out = Vec::with_capacity(4);
    for m in 0..4 {
        let [i, j, k] = f_triple(m, anchor);
        out.push(FMatrix::new(pairs, i, j, k, c)?.det());
    }
    Ok(out.try_into().expect("four polynomials"))
}

/// The 3×3 matrix `G_ijkl` acting on `(λ_i, μ_i, 1)` for a generalized
/// camera pair. Row `r` is the generalized epipolar constraint of
/// correspondence `free[r]` after placing the world origin on the point
/// seen by correspondence `anchor`.
#[derive(Debug, Clone)]
pub struct GMatrix {
    pub anchor: usize,
    pub free: (usize, usize, usize),
    pub entries: [[DensePolynomial; 3]; 3],
}

impl GMatrix {
    pub fn new(
        pairs: &[PluckerPair],
        i: usize,
        j: usize,
        k: usize,
        l: usize,
        c: &RotationConstraint,
    ) -> Result<Self> {
        Ok(Self {
            anchor: i,
            free: (j, k, l),
            entries: [
                g_row(pairs, i, j, c)?,
                g_row(pairs, i, k, c)?,
                g_row(pairs, i, l, c)?,
            ],
        })
    }

    pub fn det(&self) -> DensePolynomial {
        let b4 = GrevlexBasis::shared(4);
        let b6 = GrevlexBasis::shared(6);
        let e = &self.entries;
        let minor = |r1: usize, r2: usize, c1: usize, c2: usize| {
            let x = poly_mul(&e[r1][c1], &e[r2][c2], b4.clone()).expect("quadratic");
            let y = poly_mul(&e[r1][c2], &e[r2][c1], b4.clone()).expect("quadratic");
            x.add_scaled(&y, -1.0)
        };
        let t0 = poly_mul(&e[0][0], &minor(1, 2, 1, 2), b6.clone()).expect("sextic");
        let t1 = poly_mul(&e[0][1], &minor(1, 2, 0, 2), b6.clone()).expect("sextic");
        let t2 = poly_mul(&e[0][2], &minor(1, 2, 0, 1), b6).expect("sextic");
        t0.add_scaled(&t1, -1.0).add_scaled(&t2, 1.0)
    }

    pub fn eval(&self, u: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.entries[r][c].eval(u))
    }
}

fn g_row(
    pairs: &[PluckerPair],
    i: usize,
    j: usize,
    c: &RotationConstraint,
) -> Result<[DensePolynomial; 3]> {
    let (pi, pj) = (&pairs[i], &pairs[j]);
    let p1 = checked_cross(&pi.q1, &pj.q1, "first view")?;
    let p2 = checked_cross(&pi.q2, &pj.q2, "second view")?;
    // t' = c1 + λ q1_i and t'' = c2 + μ q2_i
    let c1 = pi.foot1();
    let c2 = pi.foot2();
    let constant = rotation_bilinear_form(&(c1.cross(&pj.q1) + pj.m1), &pj.q2, c)
        .add_scaled(&rotation_bilinear_form(&pj.q1, &(c2.cross(&pj.q2) + pj.m2), c), 1.0);
    Ok([
        rotation_bilinear_form(&p1, &pj.q2, c),
        rotation_bilinear_form(&pj.q1, &p2, c),
        constant,
    ])
}

/// Index quadruple of `g_m` and the sign that makes the anchored
/// determinant agree with the default one on the constraint sphere.
pub fn g_quadruple(m: usize, anchor: usize) -> ([usize; 4], f64) {
    let mut t = [(m + 1) % 5, (m + 2) % 5, (m + 3) % 5, (m + 4) % 5];
    let mut sign = 1.0;
    if let Some(pos) = t.iter().position(|&x| x == anchor) {
        t.rotate_left(pos);
        if pos % 2 == 1 {
            sign = -1.0;
        }
    }
    (t, sign)
}

/// The five sextics `g₁ = det G₂₃₄₅`, …, `g₅ = det G₁₂₃₄`.
pub fn build_g_polynomials(
    pairs: &[PluckerPair; 5],
    c: &RotationConstraint,
) -> Result<[DensePolynomial; 5]> {
    let mut out = Vec::with_capacity(5);
    for m in 0..5 {
        let [i, j, k, l] = [(m + 1) % 5, (m + 2) % 5, (m + 3) % 5, (m + 4) % 5];
        out.push(GMatrix::new(pairs, i, j, k, l, c)?.det());
    }
    Ok(out.try_into().expect("five polynomials"))
}

/// Anchored variant of [`build_g_polynomials`]; see [`g_quadruple`].
pub fn build_g_polynomials_anchored(
    pairs: &[PluckerPair; 5],
    c: &RotationConstraint,
    anchor: usize,
) -> Result<[DensePolynomial; 5]> {
    let mut out = Vec::with_capacity(5);
    for m in 0..5 {
        let ([i, j, k, l], sign) = g_quadruple(m, anchor);
        out.push(GMatrix::new(pairs, i, j, k, l, c)?.det().scaled(sign));
    }
    Ok(out.try_into().expect("five polynomials"))
}
