//! Golden-section search for unimodal scalar objectives.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Location and value of an extremum found by [`maximize`] or [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `f` on `[lo, hi]` until the bracket is narrower than `xtol`.
pub fn minimize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Extremum {
    assert!(hi > lo, "empty bracket");
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > xtol && iterations < 500 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let x = 0.5 * (a + b);
    Extremum { x, value: f(x), iterations }
}

/// Maximizes `f` on `[lo, hi]`.
pub fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Extremum {
    let e = minimize(|x| -f(x), lo, hi, xtol);
    Extremum { value: -e.value, ..e }
}
