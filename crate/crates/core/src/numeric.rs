use num_complex::Complex64;

/// `exp(z) - 1` without cancellation for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // Horner form of z + z^2/2 + ... + z^6/720
        let mut acc = Complex64::new(1.0 / 720.0, 0.0);
        for c in [1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0] {
            acc = acc * z + c;
        }
        acc * z
    } else {
        z.exp() - 1.0
    }
}

/// `(exp(z) - 1) / z`, equal to 1 at `z = 0`.
pub(crate) fn exprel(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let mut acc = Complex64::new(1.0 / 5040.0, 0.0);
        for c in [1.0 / 720.0, 1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0] {
            acc = acc * z + c;
        }
        acc
    } else {
        expm1(z) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_branches_match_direct() {
        for &z in &[Complex64::new(9e-4, 1e-4), Complex64::new(-2e-4, 8e-4)] {
            let direct = z.exp() - 1.0;
            assert!((expm1(z) - direct).norm() < 1e-15);
            assert!((exprel(z) - direct / z).norm() < 1e-10);
        }
        assert_eq!(exprel(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        let tiny = Complex64::new(1e-8, -1e-8);
        assert!((exprel(tiny) - (1.0 + tiny / 2.0)).norm() < 1e-16);
        assert!((expm1(tiny) - tiny).norm() < 1e-15);
        let z = Complex64::new(0.3, -2.0);
        assert!((exprel(z) - (z.exp() - 1.0) / z).norm() < 1e-14);
    }
}

/// `(exp(z) - 1 - z) / z^2`, equal to 1/2 at `z = 0`.
pub(crate) fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let mut acc = Complex64::new(1.0 / 362880.0, 0.0);
        for c in [1.0 / 40320.0, 1.0 / 5040.0, 1.0 / 720.0, 1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5] {
            acc = acc * z + c;
        }
        acc
    } else {
        (expm1(z) - z) / (z * z)
    }
}
