//! Truncated multivariate Taylor series ("jets") for exact pointwise
//! derivatives of closed-form functions.
//!
//! A jet at `x₀` stores `c_β = ∂^β f(x₀)/β!` for every multi-index with
//! `|β| ≤ order`. Arithmetic is exact up to truncation, so derivatives of
//! compositions such as `exp(−1/s(x))` come out to roundoff without any
//! differencing.

use std::sync::Arc;

/// Index bookkeeping shared by all jets of one `(dim, order)`.
#[derive(Debug)]
pub struct JetSpace {
    dim: usize,
    order: usize,
    indices: Vec<[usize; 3]>,
    /// `(i, j, target)` with `indices[i] + indices[j] = indices[target]`.
    products: Vec<(usize, usize, usize)>,
}

impl JetSpace {
    pub fn new(dim: usize, order: usize) -> Arc<Self> {
        assert!((1..=3).contains(&dim), "jet dimension must be 1..=3");
        let indices = crate::field::multi_indices(dim, order);
        let lookup = |b: [usize; 3]| indices.iter().position(|x| *x == b);
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                if sum.iter().sum::<usize>() <= order {
                    products.push((i, j, lookup(sum).expect("closed under addition")));
                }
            }
        }
        Arc::new(JetSpace {
            dim,
            order,
            indices,
            products,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[[usize; 3]] {
        &self.indices
    }

    pub fn position(&self, beta: [usize; 3]) -> Option<usize> {
        self.indices.iter().position(|x| *x == beta)
    }
}

#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// The coordinate function `x_axis` expanded at `value`.
    pub fn variable(space: &Arc<JetSpace>, axis: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.order >= 1 {
            let mut b = [0; 3];
            b[axis] = 1;
            let pos = space.position(b).expect("axis within dimension");
            j.coeffs[pos] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∂^β f(x₀)`.
    pub fn derivative(&self, beta: [usize; 3]) -> f64 {
        match self.space.position(beta) {
            Some(p) => self.coeffs[p] * beta.iter().map(|&b| factorial(b)).product::<f64>(),
            None => 0.0,
        }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, t) in &self.space.products {
            coeffs[t] += self.coeffs[i] * o.coeffs[j];
        }
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// `f(self)` given the univariate Taylor coefficients `f^{(n)}(v)/n!` of
    /// `f` at `v = self.value()`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Jet::constant(&self.space, taylor[0]);
        let mut power = Jet::constant(&self.space, 1.0);
        for &c in taylor.iter().skip(1).take(self.space.order) {
            power = power.mul(&delta);
            out = out.add(&power.scale(c));
        }
        out
    }

    fn taylor_len(&self) -> usize {
        self.space.order + 1
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let t: Vec<f64> = (0..self.taylor_len()).map(|n| e / factorial(n)).collect();
        self.compose(&t)
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        let mut t = vec![v.ln()];
        for n in 1..self.taylor_len() {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (n as f64 * v.powi(n as i32)));
        }
        self.compose(&t)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let v = self.value();
        let mut t = Vec::with_capacity(self.taylor_len());
        let mut falling = 1.0;
        for n in 0..self.taylor_len() {
            t.push(falling * v.powf(p - n as f64) / factorial(n));
            falling *= p - n as f64;
        }
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }
}
