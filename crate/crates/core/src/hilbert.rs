//! Composite Hilbert spaces and the sparse complex operator algebra.
//!
//! A space is an ordered list of factors (qubits and Fock-truncated bosonic
//! modes). Basis ordering is row-major over the factors with the *last*
//! factor varying fastest, so for qubit ⊗ qubit the states run
//! |gg⟩, |ge⟩, |eg⟩, |ee⟩. Qubit basis order is |g⟩ = 0, |e⟩ = 1 and
//! σz = |e⟩⟨e| − |g⟩⟨g|. Bosonic modes are hard-truncated at their cutoff
//! with no renormalization; truncation validity is policed downstream by
//! leakage checks during propagation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entries with modulus at or below this are dropped, keeping sparsity
/// canonical so equality checks can be structural.
pub const PRUNE_TOLERANCE: f64 = 1e-15;

/// One tensor factor of a composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    Qubit,
    /// Fock space truncated to levels 0..cutoff-1.
    Boson { cutoff: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Qubit => 2,
            Factor::Boson { cutoff } => *cutoff,
        }
    }
}

/// An ordered list of tensor factors. Factor order is fixed for the life of
/// the space and defines the tensor-leg ordering.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceSpec {
    factors: Vec<Factor>,
    dim: usize,
}

impl SpaceSpec {
    pub fn new(factors: Vec<Factor>) -> Result<Arc<Self>> {
        if factors.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        let mut dim: usize = 1;
        for (i, f) in factors.iter().enumerate() {
            if let Factor::Boson { cutoff } = f {
                if *cutoff < 2 {
                    return Err(Error::InvalidSpace(format!(
                        "boson cutoff {cutoff} at leg {i} must be >= 2"
                    )));
                }
            }
            dim = dim
                .checked_mul(f.dim())
                .ok_or_else(|| Error::InvalidSpace("dimension overflow".into()))?;
        }
        Ok(Arc::new(SpaceSpec { factors, dim }))
    }

    /// Convenience constructor: one qubit.
    pub fn single_qubit() -> Arc<Self> {
        Self::new(vec![Factor::Qubit]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Stride of a leg: the product of the dimensions of all later legs.
    pub fn stride(&self, leg: usize) -> usize {
        self.factors[leg + 1..].iter().map(|f| f.dim()).product()
    }

    /// Per-leg occupation digits of a basis index.
    pub fn decompose(&self, index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        let mut rem = index;
        for (i, f) in self.factors.iter().enumerate().rev() {
            digits[i] = rem % f.dim();
            rem /= f.dim();
        }
        digits
    }

    pub fn compose(&self, digits: &[usize]) -> usize {
        let mut index = 0;
        for (f, d) in self.factors.iter().zip(digits) {
            index = index * f.dim() + d;
        }
        index
    }

    /// Parse a basis-state label into a basis index.
    ///
    /// Labels are comma-separated tokens walked against the factor list:
    /// a run of consecutive qubit legs is one token of `g`/`e` letters, and
    /// each bosonic leg is an integer token. Examples: `gg,1` on
    /// qubit ⊗ qubit ⊗ boson, `g,3` on qubit ⊗ boson.
    pub fn label_to_index(&self, label: &str) -> Result<usize> {
        let bad = || Error::InvalidLabel(label.to_string());
        let mut digits = Vec::with_capacity(self.factors.len());
        let mut tokens = label.split(',').map(str::trim);
        let mut current: &str = "";
        let mut chars: Vec<char> = Vec::new();
        let mut char_pos = 0usize;
        for f in &self.factors {
            match f {
                Factor::Qubit => {
                    if char_pos >= chars.len() {
                        current = tokens.next().ok_or_else(bad)?;
                        chars = current.chars().collect();
                        char_pos = 0;
                        if chars.is_empty() {
                            return Err(bad());
                        }
                    }
                    match chars[char_pos] {
                        'g' => digits.push(0),
                        'e' => digits.push(1),
                        _ => return Err(bad()),
                    }
                    char_pos += 1;
                }
                Factor::Boson { cutoff } => {
                    if char_pos < chars.len() {
                        // leftover qubit letters before a boson token
                        return Err(bad());
                    }
                    let tok = tokens.next().ok_or_else(bad)?;
                    let n: usize = tok.parse().map_err(|_| bad())?;
                    if n >= *cutoff {
                        return Err(bad());
                    }
                    digits.push(n);
                    current = "";
                    chars.clear();
                    char_pos = 0;
                }
            }
        }
        let _ = current;
        if char_pos < chars.len() || tokens.next().is_some() {
            return Err(bad());
        }
        Ok(self.compose(&digits))
    }

    /// Canonical label for a basis index (inverse of `label_to_index`).
    pub fn index_to_label(&self, index: usize) -> String {
        let digits = self.decompose(index);
        let mut out = String::new();
        let mut prev_qubit = false;
        for (f, d) in self.factors.iter().zip(&digits) {
            match f {
                Factor::Qubit => {
                    if !out.is_empty() && !prev_qubit {
                        out.push(',');
                    }
                    out.push(if *d == 0 { 'g' } else { 'e' });
                    prev_qubit = true;
                }
                Factor::Boson { .. } => {
                    if !out.is_empty() {
                        out.push(',');
                    }
                    out.push_str(&d.to_string());
                    prev_qubit = false;
                }
            }
        }
        out
    }

    fn check_leg(&self, leg: usize) -> Result<()> {
        if leg >= self.factors.len() {
            return Err(Error::LegOutOfRange {
                leg,
                len: self.factors.len(),
            });
        }
        Ok(())
    }
}

/// Single-qubit generators, embedded by identity on all other legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitOp {
    /// σ+ = |e⟩⟨g|
    Sp,
    /// σ− = |g⟩⟨e|
    Sm,
    /// σz = |e⟩⟨e| − |g⟩⟨g|
    Sz,
    Id,
}

/// Bosonic-mode generators, embedded by identity on all other legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BosonOp {
    A,
    Adag,
    /// n = a†a
    N,
    Id,
}

/// A sparse complex matrix bound to a composite Hilbert space.
///
/// Operators are immutable values: every operation returns a new operator,
/// and entries below [`PRUNE_TOLERANCE`] are never stored.
#[derive(Clone, PartialEq)]
pub struct Operator {
    space: Arc<SpaceSpec>,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl Operator {
    pub fn zero(space: &Arc<SpaceSpec>) -> Self {
        Operator {
            space: Arc::clone(space),
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(space: &Arc<SpaceSpec>) -> Self {
        let entries = (0..space.dim())
            .map(|i| ((i, i), Complex64::new(1.0, 0.0)))
            .collect();
        Operator {
            space: Arc::clone(space),
            entries,
        }
    }

    pub fn from_entries<I>(space: &Arc<SpaceSpec>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), Complex64)>,
    {
        let dim = space.dim();
        let mut map = BTreeMap::new();
        for ((r, c), v) in entries {
            if r >= dim || c >= dim {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    dim,
                });
            }
            let slot = map.entry((r, c)).or_insert(Complex64::new(0.0, 0.0));
            *slot += v;
        }
        map.retain(|_, v| v.norm() > PRUNE_TOLERANCE);
        Ok(Operator {
            space: Arc::clone(space),
            entries: map,
        })
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .get(&(row, col))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Sorted iteration over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    fn check_same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_space(other)?;
        let mut entries = self.entries.clone();
        for (&key, &v) in &other.entries {
            *entries.entry(key).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        entries.retain(|_, v| v.norm() > PRUNE_TOLERANCE);
        Ok(Operator {
            space: Arc::clone(&self.space),
            entries,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Operator {
        let mut entries: BTreeMap<_, _> =
            self.entries.iter().map(|(&k, &v)| (k, v * c)).collect();
        entries.retain(|_, v| v.norm() > PRUNE_TOLERANCE);
        Operator {
            space: Arc::clone(&self.space),
            entries,
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        let entries = self
            .entries
            .iter()
            .map(|(&(r, c), &v)| ((c, r), v.conj()))
            .collect();
        Operator {
            space: Arc::clone(&self.space),
            entries,
        }
    }

    /// Matrix product.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.check_same_space(other)?;
        // group rhs entries by row for the contraction over the inner index
        let mut rhs_rows: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (&(r, c), &v) in &other.entries {
            rhs_rows.entry(r).or_default().push((c, v));
        }
        let mut entries: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (&(r, k), &a) in &self.entries {
            if let Some(row) = rhs_rows.get(&k) {
                for &(c, b) in row {
                    *entries.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += a * b;
                }
            }
        }
        entries.retain(|_, v| v.norm() > PRUNE_TOLERANCE);
        Ok(Operator {
            space: Arc::clone(&self.space),
            entries,
        })
    }

    /// A·B − B·A.
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Max-norm of A − A†; zero iff hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for (&(r, c), &v) in &self.entries {
            let conj = self.entry(c, r).conj();
            defect = defect.max((v - conj).norm());
        }
        defect
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise difference |A − B|.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        let mut keys: Vec<(usize, usize)> = self.entries.keys().copied().collect();
        keys.extend(other.entries.keys().copied());
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .map(|&(r, c)| (self.entry(r, c) - other.entry(r, c)).norm())
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (&(r, c), &v) in &self.entries {
            out[r * dim + c] = v;
        }
        out
    }

    /// Sparse matrix - dense vector product.
    pub fn apply(&self, vec: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (&(r, c), &v) in &self.entries {
            out[r] += v * vec[c];
        }
        out
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator(dim {}, nnz {})", self.dim(), self.nnz())?;
        for (&(r, c), &v) in &self.entries {
            writeln!(f, "  ({r}, {c}) -> {:.6} + {:.6}i", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Embed a local operator (entries on one leg) by identity on every other
/// leg. `local` maps (row_digit, col_digit) within the leg.
fn embed_local(
    space: &Arc<SpaceSpec>,
    leg: usize,
    local: &[(usize, usize, Complex64)],
) -> Operator {
    let dim = space.dim();
    let stride = space.stride(leg);
    let leg_dim = space.factors()[leg].dim();
    let mut entries = BTreeMap::new();
    for r in 0..dim {
        let digit = (r / stride) % leg_dim;
        for &(lr, lc, v) in local {
            if lr == digit {
                let c = r - (lr * stride) + (lc * stride);
                entries.insert((r, c), v);
            }
        }
    }
    entries.retain(|_, v: &mut Complex64| v.norm() > PRUNE_TOLERANCE);
    Operator {
        space: Arc::clone(space),
        entries,
    }
}

/// Pauli-type generator on a qubit leg, identity elsewhere.
pub fn qubit_op(space: &Arc<SpaceSpec>, leg: usize, which: QubitOp) -> Result<Operator> {
    space.check_leg(leg)?;
    if space.factors()[leg] != Factor::Qubit {
        return Err(Error::NotAQubit { leg });
    }
    let one = Complex64::new(1.0, 0.0);
    let local: Vec<(usize, usize, Complex64)> = match which {
        QubitOp::Sp => vec![(1, 0, one)],
        QubitOp::Sm => vec![(0, 1, one)],
        QubitOp::Sz => vec![(0, 0, -one), (1, 1, one)],
        QubitOp::Id => vec![(0, 0, one), (1, 1, one)],
    };
    Ok(embed_local(space, leg, &local))
}

/// Ladder/number operator on a bosonic leg, identity elsewhere.
pub fn boson_op(space: &Arc<SpaceSpec>, leg: usize, which: BosonOp) -> Result<Operator> {
    space.check_leg(leg)?;
    let cutoff = match space.factors()[leg] {
        Factor::Boson { cutoff } => cutoff,
        _ => return Err(Error::NotABoson { leg }),
    };
    let mut local = Vec::new();
    match which {
        BosonOp::A => {
            for k in 1..cutoff {
                local.push((k - 1, k, Complex64::new((k as f64).sqrt(), 0.0)));
            }
        }
        BosonOp::Adag => {
            for k in 1..cutoff {
                local.push((k, k - 1, Complex64::new((k as f64).sqrt(), 0.0)));
            }
        }
        BosonOp::N => {
            for k in 1..cutoff {
                local.push((k, k, Complex64::new(k as f64, 0.0)));
            }
        }
        BosonOp::Id => {
            for k in 0..cutoff {
                local.push((k, k, Complex64::new(1.0, 0.0)));
            }
        }
    }
    Ok(embed_local(space, leg, &local))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense reference implementation used as an independent oracle.
    mod dense_ref {
        use num_complex::Complex64;

        pub fn mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for k in 0..n {
                    let aik = a[i * n + k];
                    for j in 0..n {
                        out[i * n + j] += aik * b[k * n + j];
                    }
                }
            }
            out
        }

        pub fn dagger(a: &[Complex64], n: usize) -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    out[j * n + i] = a[i * n + j].conj();
                }
            }
            out
        }

        pub fn kron(a: &[Complex64], na: usize, b: &[Complex64], nb: usize) -> Vec<Complex64> {
            let n = na * nb;
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for i1 in 0..na {
                for j1 in 0..na {
                    for i2 in 0..nb {
                        for j2 in 0..nb {
                            out[(i1 * nb + i2) * n + (j1 * nb + j2)] =
                                a[i1 * na + j1] * b[i2 * nb + j2];
                        }
                    }
                }
            }
            out
        }

        pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
        }
    }

    fn random_sparse(space: &std::sync::Arc<SpaceSpec>, seed: u64, fill: f64) -> Operator {
        // small deterministic LCG so unit tests need no RNG dependency here
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let dim = space.dim();
        let mut entries = Vec::new();
        for r in 0..dim {
            for col in 0..dim {
                if next() < fill {
                    entries.push(((r, col), c(next() * 2.0 - 1.0, next() * 2.0 - 1.0)));
                }
            }
        }
        Operator::from_entries(space, entries).unwrap()
    }

    #[test]
    fn sp_is_single_entry() {
        let space = SpaceSpec::single_qubit();
        let sp = qubit_op(&space, 0, QubitOp::Sp).unwrap();
        assert_eq!(sp.nnz(), 1);
        assert_eq!(sp.entry(1, 0), c(1.0, 0.0));
    }

    #[test]
    fn pauli_commutator_sp_sm_is_sz() {
        let space = SpaceSpec::single_qubit();
        let sp = qubit_op(&space, 0, QubitOp::Sp).unwrap();
        let sm = qubit_op(&space, 0, QubitOp::Sm).unwrap();
        let sz = qubit_op(&space, 0, QubitOp::Sz).unwrap();
        assert_eq!(sp.commutator(&sm).unwrap(), sz);
    }

    #[test]
    fn embedded_sz_matches_hand_kronecker() {
        // qubit ⊗ qubit, sz on leg 1 (fastest-varying): diag(−1, +1, −1, +1)
        let space = SpaceSpec::new(vec![Factor::Qubit, Factor::Qubit]).unwrap();
        let sz1 = qubit_op(&space, 1, QubitOp::Sz).unwrap();
        let id2 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let szl = [c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let expected = dense_ref::kron(&id2, 2, &szl, 2);
        assert!(dense_ref::max_diff(&sz1.to_dense(), &expected) == 0.0);
        for (i, want) in [-1.0, 1.0, -1.0, 1.0].iter().enumerate() {
            assert_eq!(sz1.entry(i, i), c(*want, 0.0));
        }
    }

    #[test]
    fn embedding_preserves_algebra_on_every_leg() {
        let space = SpaceSpec::new(vec![
            Factor::Qubit,
            Factor::Boson { cutoff: 3 },
            Factor::Qubit,
        ])
        .unwrap();
        for leg in [0usize, 2] {
            let sp = qubit_op(&space, leg, QubitOp::Sp).unwrap();
            let sm = qubit_op(&space, leg, QubitOp::Sm).unwrap();
            let sz = qubit_op(&space, leg, QubitOp::Sz).unwrap();
            assert_eq!(sp.commutator(&sm).unwrap(), sz, "leg {leg}");
        }
    }

    #[test]
    fn boson_ladder_matrices() {
        let space = SpaceSpec::new(vec![Factor::Boson { cutoff: 3 }]).unwrap();
        let a = boson_op(&space, 0, BosonOp::A).unwrap();
        assert_eq!(a.entry(0, 1), c(1.0, 0.0));
        assert_eq!(a.entry(1, 2), c(2.0f64.sqrt(), 0.0));
        assert_eq!(a.nnz(), 2);

        let space4 = SpaceSpec::new(vec![Factor::Boson { cutoff: 4 }]).unwrap();
        let n = boson_op(&space4, 0, BosonOp::N).unwrap();
        for k in 0..4 {
            assert_eq!(n.entry(k, k), c(k as f64, 0.0));
        }
        let adag = boson_op(&space4, 0, BosonOp::Adag).unwrap();
        let a4 = boson_op(&space4, 0, BosonOp::A).unwrap();
        // √k·√k carries one ulp of rounding
        assert!(adag.mul(&a4).unwrap().max_abs_diff(&n) <= 1e-15);
    }

    #[test]
    fn truncated_commutation_identity() {
        // [a, a†] = diag(1, 1, ..., 1, −(N−1))
        for cutoff in [2usize, 5, 9] {
            let space = SpaceSpec::new(vec![Factor::Boson { cutoff }]).unwrap();
            let a = boson_op(&space, 0, BosonOp::A).unwrap();
            let adag = boson_op(&space, 0, BosonOp::Adag).unwrap();
            let comm = a.commutator(&adag).unwrap();
            for k in 0..cutoff - 1 {
                // (√(k+1))² − (√k)² evaluates to 1 within a few ulps of k
                assert!((comm.entry(k, k) - c(1.0, 0.0)).norm() <= 1e-14);
            }
            assert!(
                (comm.entry(cutoff - 1, cutoff - 1) - c(-((cutoff - 1) as f64), 0.0)).norm()
                    <= 1e-14
            );
        }
    }

    #[test]
    fn dagger_is_involution_and_antihomomorphism() {
        let space = SpaceSpec::new(vec![Factor::Boson { cutoff: 6 }]).unwrap();
        let a = random_sparse(&space, 7, 0.4);
        let b = random_sparse(&space, 13, 0.4);
        assert_eq!(a.dagger().dagger(), a);

        // (A·B)† = B†·A†, checked against the dense reference at dim 6
        let ab_dag = a.mul(&b).unwrap().dagger();
        let expect =
            dense_ref::mul(&dense_ref::dagger(&b.to_dense(), 6), &dense_ref::dagger(&a.to_dense(), 6), 6);
        assert!(dense_ref::max_diff(&ab_dag.to_dense(), &expect) <= 1e-12);
    }

    #[test]
    fn mul_by_identity_is_identity_map() {
        let space = SpaceSpec::new(vec![Factor::Qubit, Factor::Boson { cutoff: 4 }]).unwrap();
        let a = random_sparse(&space, 23, 0.3);
        let id = Operator::identity(&space);
        assert_eq!(a.mul(&id).unwrap(), a);
        assert_eq!(id.mul(&a).unwrap(), a);
    }

    #[test]
    fn commutator_of_operator_with_itself_vanishes() {
        let space = SpaceSpec::new(vec![Factor::Boson { cutoff: 5 }]).unwrap();
        let a = random_sparse(&space, 99, 0.5);
        assert!(a.commutator(&a).unwrap().is_zero());
    }

    #[test]
    fn atom_cavity_commutator_matches_dense_brute_force() {
        // [a†σ−, aσ+] on qubit ⊗ boson(4)
        let space = SpaceSpec::new(vec![Factor::Qubit, Factor::Boson { cutoff: 4 }]).unwrap();
        let adag_sm = boson_op(&space, 1, BosonOp::Adag)
            .unwrap()
            .mul(&qubit_op(&space, 0, QubitOp::Sm).unwrap())
            .unwrap();
        let a_sp = boson_op(&space, 1, BosonOp::A)
            .unwrap()
            .mul(&qubit_op(&space, 0, QubitOp::Sp).unwrap())
            .unwrap();
        let got = adag_sm.commutator(&a_sp).unwrap();

        let n = space.dim();
        let x = adag_sm.to_dense();
        let y = a_sp.to_dense();
        let mut expect = dense_ref::mul(&x, &y, n);
        let yx = dense_ref::mul(&y, &x, n);
        for (e, v) in expect.iter_mut().zip(&yx) {
            *e -= v;
        }
        assert!(dense_ref::max_diff(&got.to_dense(), &expect) <= 1e-12);
    }

    #[test]
    fn sparse_agrees_with_dense_reference_at_dim_64() {
        let space = SpaceSpec::new(vec![
            Factor::Qubit,
            Factor::Boson { cutoff: 8 },
            Factor::Boson { cutoff: 4 },
        ])
        .unwrap();
        assert_eq!(space.dim(), 64);
        let a = random_sparse(&space, 3, 0.05);
        let b = random_sparse(&space, 4, 0.05);
        let got = a.mul(&b).unwrap();
        let expect = dense_ref::mul(&a.to_dense(), &b.to_dense(), 64);
        assert!(dense_ref::max_diff(&got.to_dense(), &expect) <= 1e-12);

        let sum = a.add(&b).unwrap();
        let mut expect_sum = a.to_dense();
        for (e, v) in expect_sum.iter_mut().zip(b.to_dense()) {
            *e += v;
        }
        assert!(dense_ref::max_diff(&sum.to_dense(), &expect_sum) <= 1e-12);
    }

    #[test]
    fn hermitian_defect_examples() {
        let space = SpaceSpec::single_qubit();
        let sz = qubit_op(&space, 0, QubitOp::Sz).unwrap();
        assert_eq!(sz.hermitian_defect(), 0.0);
        let sp = qubit_op(&space, 0, QubitOp::Sp).unwrap();
        assert_eq!(sp.hermitian_defect(), 1.0);
    }

    #[test]
    fn space_validation() {
        assert!(SpaceSpec::new(vec![]).is_err());
        assert!(SpaceSpec::new(vec![Factor::Boson { cutoff: 1 }]).is_err());
        let space = SpaceSpec::single_qubit();
        assert!(qubit_op(&space, 1, QubitOp::Sp).is_err());
        assert!(boson_op(&space, 0, BosonOp::A).is_err());
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let s1 = SpaceSpec::new(vec![Factor::Qubit]).unwrap();
        let s2 = SpaceSpec::new(vec![Factor::Boson { cutoff: 2 }]).unwrap();
        let a = Operator::identity(&s1);
        let b = Operator::identity(&s2);
        assert!(matches!(a.add(&b), Err(Error::SpaceMismatch)));
        assert!(matches!(a.mul(&b), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn labels_round_trip() {
        let space = SpaceSpec::new(vec![
            Factor::Qubit,
            Factor::Qubit,
            Factor::Boson { cutoff: 5 },
        ])
        .unwrap();
        let idx = space.label_to_index("gg,1").unwrap();
        assert_eq!(space.decompose(idx), vec![0, 0, 1]);
        assert_eq!(space.index_to_label(idx), "gg,1");
        let idx = space.label_to_index("eg,4").unwrap();
        assert_eq!(space.decompose(idx), vec![1, 0, 4]);

        let ac = SpaceSpec::new(vec![Factor::Qubit, Factor::Boson { cutoff: 10 }]).unwrap();
        assert_eq!(ac.label_to_index("g,3").unwrap(), 3);
        assert_eq!(ac.label_to_index("e,0").unwrap(), 10);
        assert!(ac.label_to_index("x,0").is_err());
        assert!(ac.label_to_index("g,12").is_err());
        assert!(ac.label_to_index("g").is_err());
        assert!(ac.label_to_index("g,3,1").is_err());
    }

    #[test]
    fn stored_zeros_are_pruned() {
        let space = SpaceSpec::single_qubit();
        let sp = qubit_op(&space, 0, QubitOp::Sp).unwrap();
        let diff = sp.sub(&sp).unwrap();
        assert_eq!(diff.nnz(), 0);
    }
}
