use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub root: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Brent's bracketed root finder (inverse quadratic / secant steps guarded by bisection).
///
/// Requires `f(a)` and `f(b)` of opposite sign. Terminates when the bracket is
/// narrower than `2 * (xtol + rtol * |x|)` or an exact zero is hit.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, rtol: f64, max_iter: usize) -> Result<RootResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut xpre, mut xcur) = (a, b);
    let (mut fpre, mut fcur) = (f(xpre)?, f(xcur)?);
    if fpre == 0.0 {
        return Ok(RootResult { root: xpre, value: 0.0, iterations: 0 });
    }
    if fcur == 0.0 {
        return Ok(RootResult { root: xcur, value: 0.0, iterations: 0 });
    }
    if fpre.signum() == fcur.signum() {
        return Err(Error::Numeric(format!(
            "root not bracketed: f({a}) = {fpre}, f({b}) = {fcur}"
        )));
    }

    let (mut xblk, mut fblk) = (0.0, 0.0);
    let (mut spre, mut scur) = (0.0_f64, 0.0_f64);

    for iter in 1..=max_iter {
        if fpre != 0.0 && fcur != 0.0 && fpre.signum() != fcur.signum() {
            xblk = xpre;
            fblk = fpre;
            spre = xcur - xpre;
            scur = spre;
        }
        if fblk.abs() < fcur.abs() {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }

        let delta = 0.5 * (xtol + rtol * xcur.abs());
        let sbis = 0.5 * (xblk - xcur);
        if fcur == 0.0 || sbis.abs() < delta {
            return Ok(RootResult { root: xcur, value: fcur, iterations: iter });
        }

        if spre.abs() > delta && fcur.abs() < fpre.abs() {
            let stry = if xpre == xblk {
                // secant
                -fcur * (xcur - xpre) / (fcur - fpre)
            } else {
                // inverse quadratic interpolation
                let dpre = (fpre - fcur) / (xpre - xcur);
                let dblk = (fblk - fcur) / (xblk - xcur);
                -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            };
            if 2.0 * stry.abs() < spre.abs().min(3.0 * sbis.abs() - delta) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }

        xpre = xcur;
        fpre = fcur;
        if scur.abs() > delta {
            xcur += scur;
        } else {
            xcur += if sbis > 0.0 { delta } else { -delta };
        }
        fcur = f(xcur)?;
    }
    Err(Error::Numeric(format!(
        "brent did not converge in {max_iter} iterations (last x = {xcur}, f = {fcur})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root_of_two() {
        let r = brent(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 1e-14, 100).unwrap();
        assert!((r.root - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed_interval() {
        let err = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 0.0, 50).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn exact_endpoint_root() {
        let r = brent(|x| Ok(x - 1.0), 1.0, 3.0, 1e-12, 0.0, 50).unwrap();
        assert_eq!(r.root, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn propagates_evaluation_errors() {
        let err = brent(|_| Err(Error::Accuracy("boom".into())), 0.0, 1.0, 1e-12, 0.0, 50);
        assert!(matches!(err, Err(Error::Accuracy(_))));
    }
}
