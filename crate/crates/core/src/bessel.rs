//! Spherical Bessel functions of the first kind, `j_q(x)`, with derivatives.
//!
//! The hard-aperture mode basis expands each source envelope over spherical
//! Bessel functions, so whole sequences `j_0 .. j_Q` are needed at once, for
//! orders well past the turning point `q ~ x` where the functions decay
//! super-exponentially. Three regimes are used:
//!
//! * `x < 0.5`: the ascending power series, term by term per order (the
//!   closed expressions cancel catastrophically here);
//! * `q <= 0.95 x`: forward recurrence from the closed `j_0`, `j_1`
//!   (both solutions of the recurrence are oscillatory in this range, so the
//!   forward direction is stable);
//! * `q > 0.95 x`: backward (Miller) recurrence from a padded start order,
//!   anchored against the forward values, with rescaling to dodge overflow.
//!
//! Derivatives come from `j_q'(x) = j_{q-1}(x) - (q+1)/x * j_q(x)`.

use crate::scalar::Real;

/// Extra orders above the largest requested one from which the backward
/// recurrence starts. The square-root rule gives full double precision.
fn miller_start(q_max: usize, x: f64) -> usize {
    let pad = (40.0 * (q_max as f64 + 1.0)).sqrt().ceil() as usize;
    q_max.max(x.ceil() as usize) + 16 + pad
}

/// Power series for one order at small argument:
/// `j_q(x) = x^q/(2q+1)!! * (1 - (x^2/2)/(2q+3) + ...)`. Eight terms give
/// full precision for `x < 0.5`.
fn series_jq<T: Real>(prefactor: T, q: usize, x: T) -> T {
    let half_x2 = x * x * T::c(0.5);
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..=8usize {
        let denom = T::c(k as f64) * T::c((2 * q + 2 * k + 1) as f64);
        term *= -half_x2 / denom;
        sum += term;
    }
    prefactor * sum
}

fn closed_j0<T: Real>(x: T) -> T {
    x.sin() / x
}

fn closed_j1<T: Real>(x: T) -> T {
    (x.sin() / x - x.cos()) / x
}

/// `j_0 .. j_q_max` and their derivatives at `x` (any real argument).
///
/// Values below roughly `1e-300` underflow to zero, which is the correct
/// limit for the expansions built on top. The two returned vectors have
/// length `q_max + 1`.
pub fn spherical_bessel_sequence<T: Real>(q_max: usize, x: T) -> (Vec<T>, Vec<T>) {
    let ax = x.abs();
    let (mut j, mut jp) = sequence_nonnegative(q_max, ax);
    if x < T::zero() {
        // j_q is even/odd with its order: j_q(-x) = (-1)^q j_q(x), and the
        // derivative picks up the opposite parity.
        for q in 0..=q_max {
            if q % 2 == 1 {
                j[q] = -j[q];
            } else {
                jp[q] = -jp[q];
            }
        }
    }
    (j, jp)
}

fn sequence_nonnegative<T: Real>(q_max: usize, x: T) -> (Vec<T>, Vec<T>) {
    let n = q_max + 1;
    let mut j = vec![T::zero(); n];

    if x == T::zero() {
        j[0] = T::one();
        let mut jp = vec![T::zero(); n];
        if q_max >= 1 {
            jp[1] = T::c(1.0 / 3.0);
        }
        return (j, jp);
    }

    if x < T::c(0.5) {
        // Ascending series, with the double-factorial prefactor carried by
        // recurrence; it underflows to zero exactly when the function does.
        let mut prefactor = T::one();
        for (q, value) in j.iter_mut().enumerate() {
            if q > 0 {
                prefactor *= x / T::c((2 * q + 1) as f64);
            }
            *value = series_jq(prefactor, q, x);
        }
        let jp = derivatives(&j, x);
        return (j, jp);
    }

    // Forward recurrence region.
    let xf = x.as_f64();
    let q_split = q_max.min((0.95 * xf).floor() as usize);
    j[0] = closed_j0(x);
    if q_max >= 1 {
        j[1] = closed_j1(x);
    }
    for q in 1..q_split.max(1) {
        if q + 1 > q_max {
            break;
        }
        j[q + 1] = T::c((2 * q + 1) as f64) / x * j[q] - j[q - 1];
    }

    if q_max > q_split && q_max >= 2 {
        // Backward recurrence with rescaling, then anchor the scale against
        // the forward values at whichever of the two anchor orders is larger
        // in magnitude (they cannot both be near a zero).
        let big = {
            let cand = T::from_f64(1e250);
            match cand {
                Some(v) if v.as_f64().is_finite() => v,
                _ => T::c(1e30),
            }
        };
        let small = T::one() / big;

        let start = miller_start(q_max, xf);
        let mut f_next = T::zero(); // f_{q+1}
        let mut f_cur = small; // f_q at q = start
        let mut miller = vec![T::zero(); n];
        for q in (0..=start).rev() {
            if q <= q_max {
                miller[q] = f_cur;
            }
            let f_prev = T::c((2 * q + 1) as f64) / x * f_cur - f_next;
            f_next = f_cur;
            f_cur = f_prev;
            if f_cur.abs() > big {
                f_cur *= small;
                f_next *= small;
                for v in miller.iter_mut().skip(q.min(q_max)) {
                    *v *= small;
                }
            }
        }

        let anchor_hi = q_split.max(1);
        let anchor_lo = anchor_hi - 1;
        let anchor = if j[anchor_hi].abs() >= j[anchor_lo].abs() {
            anchor_hi
        } else {
            anchor_lo
        };
        let factor = j[anchor] / miller[anchor];
        for q in (q_split + 1)..n {
            j[q] = miller[q] * factor;
        }
    }

    let jp = derivatives(&j, x);
    (j, jp)
}

fn derivatives<T: Real>(j: &[T], x: T) -> Vec<T> {
    let mut jp = vec![T::zero(); j.len()];
    jp[0] = if j.len() > 1 { -j[1] } else { -closed_j1(x) };
    for q in 1..j.len() {
        jp[q] = j[q - 1] - T::c((q + 1) as f64) / x * j[q];
    }
    jp
}

#[cfg(test)]
// Reference values keep every digit of the computation that produced them.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Reference values computed independently at high precision.
    /// Rows are x = 0.3, 2.0, 7.5, 56.5; columns are q = 0, 1, 2, 5, 10.
    const REF_X: [f64; 4] = [0.3, 2.0, 7.5, 56.5];
    const REF_Q: [usize; 5] = [0, 1, 2, 5, 10];
    const REF_J: [[f64; 5]; 4] = [
        [
            9.85067355537798561e-01,
            9.91028880406419621e-02,
            5.96152486862022019e-03,
            2.32958255672903156e-07,
            4.28629297056010548e-16,
        ],
        [
            4.54648713412840855e-01,
            4.35397774979991659e-01,
            1.98447949057146744e-01,
            2.63516977024411863e-03,
            6.82530086497474314e-08,
        ],
        [
            1.25066663569965181e-01,
            -2.95424872353414192e-02,
            -1.36883658464101748e-01,
            1.56854795948034920e-01,
            1.12598309152915042e-02,
        ],
        [
            -8.61036369470571028e-04,
            -1.76933981317896512e-02,
            -7.84360977041007566e-05,
            -1.73249151693058642e-02,
            -1.42855410416706657e-02,
        ],
    ];

    #[test]
    fn matches_reference_values() {
        for (row, &x) in REF_X.iter().enumerate() {
            let (j, _) = spherical_bessel_sequence(10, x);
            for (col, &q) in REF_Q.iter().enumerate() {
                assert_relative_eq!(
                    j[q],
                    REF_J[row][col],
                    max_relative = 1e-13,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn completeness_sum_is_one() {
        // sum_q (2q+1) j_q(x)^2 = 1 for every x.
        for x in [0.05, 0.4, 1.0, 7.5, 23.0] {
            let (j, _) = spherical_bessel_sequence(80, x);
            let s: f64 = j
                .iter()
                .enumerate()
                .map(|(q, v)| (2 * q + 1) as f64 * v * v)
                .sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for x in [0.2, 0.45, 2.0, 9.3] {
            let (_, jp) = spherical_bessel_sequence(12, x);
            let (jplus, _) = spherical_bessel_sequence(12, x + h);
            let (jminus, _) = spherical_bessel_sequence(12, x - h);
            for q in 0..=12 {
                let fd = (jplus[q] - jminus[q]) / (2.0 * h);
                assert_relative_eq!(jp[q], fd, epsilon = 1e-8, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn zero_argument_is_exact() {
        let (j, jp) = spherical_bessel_sequence(5, 0.0);
        assert_eq!(j[0], 1.0);
        assert_eq!(&j[1..], &[0.0; 5]);
        assert_eq!(jp[0], 0.0);
        assert_relative_eq!(jp[1], 1.0 / 3.0);
        assert_eq!(&jp[2..], &[0.0; 4]);
    }

    #[test]
    fn negative_arguments_follow_parity() {
        let (j, jp) = spherical_bessel_sequence(7, 2.4);
        let (jn, jpn) = spherical_bessel_sequence(7, -2.4);
        for q in 0..=7 {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(jn[q], sign * j[q], epsilon = 1e-15);
            assert_relative_eq!(jpn[q], -sign * jp[q], epsilon = 1e-15);
        }
    }

    #[test]
    fn deep_evanescent_orders_underflow_gracefully() {
        let (j, _) = spherical_bessel_sequence::<f64>(120, 0.4);
        assert!(j[119].abs() < 1e-200);
        assert!(j.iter().all(|v| v.is_finite()));
        // Still correct where representable.
        assert_relative_eq!(j[0], 0.4f64.sin() / 0.4, max_relative = 1e-14);
    }

    #[test]
    fn series_and_recurrence_regions_join_smoothly() {
        // Evaluate just below and above the series cutoff; the q = 3 value
        // must agree through the branch switch.
        let (ja, _) = spherical_bessel_sequence::<f64>(6, 0.4999);
        let (jb, _) = spherical_bessel_sequence(6, 0.5001);
        for q in 0..=6 {
            let rel = (ja[q] - jb[q]).abs() / jb[q].abs();
            // The function itself changes by ~ q * dx/x ~ 2e-3 at most.
            assert!(rel < 5e-3, "order {q} jumps across the cutoff: {rel}");
        }
    }

    #[test]
    fn single_precision_smoke() {
        let (j, _) = spherical_bessel_sequence::<f32>(6, 2.0f32);
        assert_relative_eq!(j[0], 0.45464873f32, max_relative = 1e-5);
        assert_relative_eq!(j[2], 0.19844795f32, max_relative = 1e-4);
    }

    #[test]
    fn large_order_large_argument() {
        // Turning-point stress: orders far beyond x must still come out
        // finite and satisfy the completeness sum.
        let (j, _) = spherical_bessel_sequence(400, 120.0);
        let s: f64 = j
            .iter()
            .enumerate()
            .map(|(q, v)| (2 * q + 1) as f64 * v * v)
            .sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-11);
    }
}
