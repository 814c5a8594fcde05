//! Dense complex matrix kernels: multiplication, LU solves, and the
//! scaling-and-squaring matrix exponential with degree-adaptive diagonal
//! Padé approximants (Higham's method). Dimensions here are small (tens),
//! so everything is straightforward row-major code tuned for tight inner
//! loops rather than for large-matrix blocking.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n);
        CMat { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    pub fn scale_inplace(&mut self, c: Complex64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// self += c · other
    pub fn axpy(&mut self, c: Complex64, other: &CMat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// out = self · other (out must be distinct storage)
    pub fn mul_into(&self, other: &CMat, out: &mut CMat) {
        let n = self.n;
        out.data.fill(ZERO);
        for i in 0..n {
            let arow = &self.data[i * n..(i + 1) * n];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.n);
        self.mul_into(other, &mut out);
        out
    }

    /// y = self · x
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.n;
        for (i, out) in y.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn dagger(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        let mut best: f64 = 0.0;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.data[i * n + j].norm();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Solve A·X = B in place (X overwrites `b`), destroying `a`.
/// Partial-pivot LU; panics on exactly singular input (the exponential
/// denominators used here are always well conditioned).
pub fn lu_solve_inplace(a: &mut CMat, b: &mut CMat) {
    let n = a.n;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // pivot
        let mut best = k;
        let mut best_mag = a.get(k, k).norm();
        for r in k + 1..n {
            let mag = a.get(r, k).norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        assert!(best_mag > 0.0, "singular matrix in lu_solve");
        if best != k {
            for c in 0..n {
                a.data.swap(k * n + c, best * n + c);
            }
            perm.swap(k, best);
            for c in 0..n {
                b.data.swap(k * n + c, best * n + c);
            }
        }
        let pivot = a.get(k, k);
        for r in k + 1..n {
            let factor = a.get(r, k) / pivot;
            if factor == ZERO {
                continue;
            }
            a.set(r, k, factor);
            for c in k + 1..n {
                let v = a.get(r, c) - factor * a.get(k, c);
                a.set(r, c, v);
            }
            for c in 0..n {
                let v = b.get(r, c) - factor * b.get(k, c);
                b.set(r, c, v);
            }
        }
    }
    // back substitution
    for k in (0..n).rev() {
        let pivot = a.get(k, k);
        for c in 0..n {
            let mut v = b.get(k, c);
            for j in k + 1..n {
                v -= a.get(k, j) * b.get(j, c);
            }
            b.set(k, c, v / pivot);
        }
    }
}

// Padé coefficient tables and 1-norm thresholds from Higham,
// "The Scaling and Squaring Method for the Matrix Exponential Revisited".
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Workspace for repeated small-matrix exponentials without reallocation.
pub struct ExpmWorkspace {
    n: usize,
    a2: CMat,
    a4: CMat,
    a6: CMat,
    u: CMat,
    v: CMat,
    tmp: CMat,
    tmp2: CMat,
}

impl ExpmWorkspace {
    pub fn new(n: usize) -> Self {
        ExpmWorkspace {
            n,
            a2: CMat::zeros(n),
            a4: CMat::zeros(n),
            a6: CMat::zeros(n),
            u: CMat::zeros(n),
            v: CMat::zeros(n),
            tmp: CMat::zeros(n),
            tmp2: CMat::zeros(n),
        }
    }

    /// exp(A) by scaling-and-squaring with the smallest adequate Padé degree.
    pub fn expm(&mut self, a: &CMat, out: &mut CMat) {
        assert_eq!(a.n, self.n);
        let norm = a.one_norm();
        if norm <= THETA_9 {
            let degree = if norm <= THETA_3 {
                3
            } else if norm <= THETA_5 {
                5
            } else if norm <= THETA_7 {
                7
            } else {
                9
            };
            self.pade_low(a, degree, out);
            return;
        }
        // degree 13 with scaling
        let squarings = ((norm / THETA_13).log2().ceil().max(0.0)) as u32;
        let scale = Complex64::new((0.5f64).powi(squarings as i32), 0.0);
        let mut scaled = a.clone();
        scaled.scale_inplace(scale);
        self.pade13(&scaled, out);
        for _ in 0..squarings {
            self.tmp.data.copy_from_slice(&out.data);
            self.tmp.mul_into(&self.tmp.clone(), out);
        }
    }

    /// Diagonal Padé of degree 3/5/7/9 evaluated by even/odd splitting:
    /// U = A·(odd coefficients in A²), V = even coefficients in A²,
    /// then (V − U)·X = (V + U).
    fn pade_low(&mut self, a: &CMat, degree: usize, out: &mut CMat) {
        let b: &[f64] = match degree {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        let n = self.n;
        a.mul_into(a, &mut self.a2);
        // powers of A²: tmp holds A^{2k}
        // accumulate even part in v, odd-part polynomial (before the final
        // multiply by A) in u
        self.v = CMat::identity(n);
        self.v.scale_inplace(Complex64::new(b[0], 0.0));
        self.u = CMat::identity(n);
        self.u.scale_inplace(Complex64::new(b[1], 0.0));
        let mut power = self.a2.clone(); // A^{2k}, starting k = 1
        let mut k = 1;
        loop {
            self.v.axpy(Complex64::new(b[2 * k], 0.0), &power);
            if 2 * k < degree {
                self.u.axpy(Complex64::new(b[2 * k + 1], 0.0), &power);
            }
            if 2 * (k + 1) > degree {
                break;
            }
            power.mul_into(&self.a2, &mut self.tmp);
            std::mem::swap(&mut power, &mut self.tmp);
            k += 1;
        }
        a.mul_into(&self.u, &mut self.tmp); // tmp = A·(odd poly) = U
        // out <- V + U, tmp2 <- V − U
        out.data.copy_from_slice(&self.v.data);
        out.axpy(ONE, &self.tmp);
        self.tmp2.data.copy_from_slice(&self.v.data);
        self.tmp2.axpy(-ONE, &self.tmp);
        lu_solve_inplace(&mut self.tmp2, out);
    }

    fn pade13(&mut self, a: &CMat, out: &mut CMat) {
        let b = &B13;
        let n = self.n;
        a.mul_into(a, &mut self.a2);
        self.a2.mul_into(&self.a2.clone(), &mut self.a4);
        self.a4.mul_into(&self.a2, &mut self.a6);

        // U = A·[A6·(b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I]
        self.tmp.data.fill(ZERO);
        self.tmp.axpy(Complex64::new(b[13], 0.0), &self.a6);
        self.tmp.axpy(Complex64::new(b[11], 0.0), &self.a4);
        self.tmp.axpy(Complex64::new(b[9], 0.0), &self.a2);
        self.a6.mul_into(&self.tmp.clone(), &mut self.u);
        self.u.axpy(Complex64::new(b[7], 0.0), &self.a6);
        self.u.axpy(Complex64::new(b[5], 0.0), &self.a4);
        self.u.axpy(Complex64::new(b[3], 0.0), &self.a2);
        let eye = CMat::identity(n);
        self.u.axpy(Complex64::new(b[1], 0.0), &eye);
        a.mul_into(&self.u.clone(), &mut self.tmp); // tmp = U

        // V = A6·(b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
        self.v.data.fill(ZERO);
        self.v.axpy(Complex64::new(b[12], 0.0), &self.a6);
        self.v.axpy(Complex64::new(b[10], 0.0), &self.a4);
        self.v.axpy(Complex64::new(b[8], 0.0), &self.a2);
        self.a6.mul_into(&self.v.clone(), &mut self.tmp2);
        std::mem::swap(&mut self.v, &mut self.tmp2);
        self.v.axpy(Complex64::new(b[6], 0.0), &self.a6);
        self.v.axpy(Complex64::new(b[4], 0.0), &self.a4);
        self.v.axpy(Complex64::new(b[2], 0.0), &self.a2);
        self.v.axpy(Complex64::new(b[0], 0.0), &eye);

        out.data.copy_from_slice(&self.v.data);
        out.axpy(ONE, &self.tmp);
        self.tmp2.data.copy_from_slice(&self.v.data);
        self.tmp2.axpy(-ONE, &self.tmp);
        lu_solve_inplace(&mut self.tmp2, out);
    }
}

/// One-shot matrix exponential.
pub fn expm(a: &CMat) -> CMat {
    let mut ws = ExpmWorkspace::new(a.n());
    let mut out = CMat::zeros(a.n());
    ws.expm(a, &mut out);
    out
}
