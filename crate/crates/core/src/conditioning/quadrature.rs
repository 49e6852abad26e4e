//! Adaptive vector-valued Gauss-Kronrod (G7, K15) quadrature on an interval.

/// Kronrod abscissae on [0, 1] side (symmetric), QUADPACK dqk15 constants.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// 7-point Gauss weights, paired with XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

pub(crate) struct QuadOutcome {
    pub value: Vec<f64>,
    /// Accumulated absolute error estimate (max over components).
    pub error: f64,
    /// False when the segment budget ran out before reaching the tolerance.
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    dim: usize,
    a: f64,
    b: f64,
    scratch: &mut [f64],
) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    for (k, &x) in XGK.iter().enumerate() {
        let wk = WGK[k];
        let wg = if k % 2 == 1 { Some(WG[k / 2]) } else { None };
        let offsets: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in offsets {
            f(c + s * x * h, scratch);
            for d in 0..dim {
                kron[d] += wk * scratch[d];
                if let Some(w) = wg {
                    gauss[d] += w * scratch[d];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        error = error.max((kron[d] - gauss[d]).abs());
    }
    Segment {
        a,
        b,
        value: kron,
        error,
    }
}

/// Integrates a vector-valued integrand over `[a, b]`, bisecting the segment
/// with the largest error until the summed estimate drops below `tol` or the
/// evaluation budget is exhausted.
pub(crate) fn integrate<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> QuadOutcome {
    let mut scratch = vec![0.0; dim];
    let mut evals = 15;
    let mut segments = vec![gk15(&mut f, dim, a, b, &mut scratch)];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= tol {
            break;
        }
        if evals + 30 > max_evals {
            let mut value = vec![0.0; dim];
            for s in &segments {
                for d in 0..dim {
                    value[d] += s.value[d];
                }
            }
            return QuadOutcome {
                value,
                error: total_error,
                converged: false,
            };
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let Segment { a, b, .. } = segments.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // interval exhausted at float resolution; accept as-is
            segments.push(gk15(&mut f, dim, a, b, &mut scratch));
            break;
        }
        segments.push(gk15(&mut f, dim, a, mid, &mut scratch));
        segments.push(gk15(&mut f, dim, mid, b, &mut scratch));
        evals += 30;
    }
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    for s in &segments {
        error += s.error;
        for d in 0..dim {
            value[d] += s.value[d];
        }
    }
    QuadOutcome {
        value,
        error,
        converged: true,
    }
}
