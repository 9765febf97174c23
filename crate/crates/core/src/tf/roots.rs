//! Polynomial root finding.
//!
//! Roots are the eigenvalues of the balanced companion matrix, obtained with
//! the Francis double-shift QR iteration on the (already upper Hessenberg)
//! companion form, then polished with Newton steps on the original
//! polynomial. Exact roots at the origin are factored out first so that
//! integrators come back as exact zeros.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use super::poly::Polynomial;

const MAX_QR_ITERATIONS: usize = 60;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum RootError {
    #[error("QR iteration failed to converge for a degree-{degree} polynomial")]
    NoConvergence { degree: usize },
    #[error("polynomial has non-finite coefficients")]
    NonFinite,
}

/// All roots of `p`, sorted by real part then imaginary part.
///
/// A constant polynomial has no roots. Complex roots are returned as exact
/// conjugate pairs.
pub fn roots(p: &Polynomial) -> Result<Vec<Complex64>, RootError> {
    if p.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(RootError::NonFinite);
    }
    if p.degree() == 0 {
        return Ok(Vec::new());
    }

    let coeffs = p.coeffs();
    let zeros_at_origin = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced = Polynomial::new(coeffs[zeros_at_origin..].to_vec());

    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    out.extend(nonzero_roots(&reduced)?);
    sort_roots(&mut out);
    Ok(out)
}

fn nonzero_roots(p: &Polynomial) -> Result<Vec<Complex64>, RootError> {
    let n = p.degree();
    match n {
        0 => return Ok(Vec::new()),
        1 => {
            let c = p.coeffs();
            return Ok(vec![Complex64::new(-c[0] / c[1], 0.0)]);
        }
        _ => {}
    }

    // 1-based Hessenberg storage keeps the QR sweep close to its textbook form.
    let lead = p.leading();
    let c = p.coeffs();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for j in 1..=n {
        a[1][j] = -c[n - j] / lead;
    }
    for i in 2..=n {
        a[i][i - 1] = 1.0;
    }
    balance(&mut a, n);
    let eig = hessenberg_eigenvalues(&mut a, n)?;

    let dp = p.derivative();
    let mut out = Vec::with_capacity(n);
    for z in eig {
        if z.im < 0.0 {
            // paired with its conjugate below
            continue;
        }
        let polished = polish(p, &dp, z);
        if z.im > 0.0 {
            let polished = if polished.im.abs() > 0.0 { polished } else { z };
            out.push(polished);
            out.push(polished.conj());
        } else {
            out.push(Complex64::new(polished.re, 0.0));
        }
    }
    Ok(out)
}

fn polish(p: &Polynomial, dp: &Polynomial, z0: Complex64) -> Complex64 {
    let mut z = z0;
    let mut best = p.eval(z).norm();
    for _ in 0..3 {
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let candidate = z - p.eval(z) / d;
        let r = p.eval(candidate).norm();
        if !(r < best) {
            break;
        }
        best = r;
        z = candidate;
    }
    z
}

fn sort_roots(r: &mut [Complex64]) {
    r.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Diagonal similarity scaling by powers of two so that row and column norms
/// are comparable. Preserves Hessenberg structure.
fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix stored 1-based in `a[1..=n][1..=n]`.
/// The matrix is destroyed.
#[allow(clippy::many_single_char_names)]
fn hessenberg_eigenvalues(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>, RootError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r, mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                // one root found
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    // two roots found
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_QR_ITERATIONS {
                        return Err(RootError::NoConvergence { degree: n });
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;

                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s0;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    // double QR step on rows l..nn and columns m..nn
                    for k in m..nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                    }
                }
            }
            if nn == 0 || l + 1 >= nn {
                break;
            }
        }
    }

    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}
