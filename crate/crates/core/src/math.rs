//! Small numeric helpers: deterministic matrix products, the GELU
//! nonlinearity and its derivative, seeded initialization, and content
//! fingerprints.
//!
//! Matrix products are written as explicit row-major loops so that the
//! accumulation order never depends on operand sizes. Row `i` of every
//! product depends only on row `i` of the left operand, which is what the
//! trunk's prefix-stability tests rely on.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// `a · wᵀ` for `a: T×k`, `w: m×k` (weights stored out×in) → `T×m`.
pub fn matmul_nt(a: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let (t, k) = a.dim();
    let (m, k2) = w.dim();
    assert_eq!(k, k2, "matmul_nt inner dims {k} vs {k2}");
    let mut out = Array2::zeros((t, m));
    for i in 0..t {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[[i, l]] * w[[j, l]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// `a · b` for `a: T×k`, `b: k×m` → `T×m`.
pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (t, k) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
    let mut out = Array2::zeros((t, m));
    for i in 0..t {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[[i, l]] * b[[l, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// `aᵀ · b` for `a: k×t`, `b: k×m` → `t×m`.
pub fn matmul_tn(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (k, t) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k, k2, "matmul_tn inner dims {k} vs {k2}");
    let mut out = Array2::zeros((t, m));
    for i in 0..t {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[[l, i]] * b[[l, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

const GELU_SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// Tanh-form GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_prime(x: f64) -> f64 {
    let u = GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    let du = GELU_SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Matrix with entries uniform in `[-1/√fan_in, +1/√fan_in]`,
/// shape `rows×cols`, drawn row-major from `rng`.
pub fn uniform_init(rng: &mut ChaCha20Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            out[[i, j]] = rng.random_range(-bound..=bound);
        }
    }
    out
}

/// Deterministic RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a over raw bytes. Used for content fingerprints, not security.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Fingerprint of a sequence of float tensors (bit-exact).
pub fn checksum_tensors<'a, I>(tensors: I) -> u64
where
    I: IntoIterator<Item = &'a Array2<f64>>,
{
    let mut bytes = Vec::new();
    for t in tensors {
        let (r, c) = t.dim();
        bytes.extend_from_slice(&(r as u64).to_le_bytes());
        bytes.extend_from_slice(&(c as u64).to_le_bytes());
        for v in t.iter() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    fnv1a(&bytes)
}

/// Euclidean norm.
pub fn l2_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(f64::is_finite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matmul_nt_matches_hand_product() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let w = array![[5.0, 6.0], [7.0, 8.0], [9.0, 10.0]]; // 3×2, out×in
        let p = matmul_nt(&a, &w);
        assert_eq!(p, array![[17.0, 23.0, 29.0], [39.0, 53.0, 67.0]]);
    }

    #[test]
    fn matmul_variants_agree() {
        let mut rng = seeded_rng(7);
        let a = uniform_init(&mut rng, 3, 4, 4);
        let b = uniform_init(&mut rng, 4, 2, 4);
        let direct = matmul(&a, &b);
        let via_nt = matmul_nt(&a, &b.t().to_owned());
        for (x, y) in direct.iter().zip(via_nt.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn gelu_prime_matches_central_difference() {
        let h = 1e-6;
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 4.0] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            let an = gelu_prime(x);
            assert!(
                (fd - an).abs() < 1e-8,
                "gelu'({x}): fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn uniform_init_is_seed_deterministic_and_bounded() {
        let a = uniform_init(&mut seeded_rng(42), 5, 7, 7);
        let b = uniform_init(&mut seeded_rng(42), 5, 7, 7);
        assert_eq!(a, b);
        let bound = 1.0 / (7.0f64).sqrt();
        assert!(a.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn checksum_detects_single_bit_change() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let mut b = a.clone();
        let before = checksum_tensors([&a]);
        b[[1, 1]] = 4.000000000000001;
        assert_ne!(before, checksum_tensors([&b]));
        assert_eq!(before, checksum_tensors([&a]));
    }
}
