//! Test oracles shared by the integration tests.

#![allow(clippy::excessive_precision)]
#![allow(dead_code)]

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let (f1, f2) = (f(c - h * x), f(c + h * x));
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(&f, a, b, tol, 50)
}

/// Root of an increasing function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Internal branch length of the coalescent point process tree with branch
/// heights `h` (branch 0 is the tallest), as an integral over height of the
/// number of lineages ancestral to two or more tips. At height `t` the
/// surviving lineages are the branches taller than `t`; each subtends the
/// tips up to the next surviving branch. The stem above the highest merge
/// is not counted.
pub fn cpp_internal_length_by_lineages(h: &[f64]) -> f64 {
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(h);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        // surviving branch indices, branch 0 always survives
        let alive: Vec<usize> = std::iter::once(0)
            .chain((1..=h.len()).filter(|&i| h[i - 1] > t))
            .collect();
        let ends = alive
            .iter()
            .skip(1)
            .copied()
            .chain(std::iter::once(h.len() + 1));
        let internal = alive.iter().zip(ends).filter(|(&s, e)| e - s >= 2).count();
        total += internal as f64 * (w[1] - w[0]);
    }
    total
}

/// Mean of `f` over all permutations of `xs` (Heap's algorithm).
pub fn mean_over_permutations(xs: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut a = xs.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    let mut sum = f(&a);
    let mut count = 1usize;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            sum += f(&a);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    sum / count as f64
}
