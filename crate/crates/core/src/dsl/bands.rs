//! The factorial bands `[k!·k, (k+1)!]`, `k >= 1`, behind `distosc`.
//!
//! Bands are pairwise disjoint and increasing: `(k+1)! < (k+1)!·(k+1)`, so
//! the gap `((k+1)!, (k+1)!·(k+1))` separates band `k` from band `k+1`.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub k: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Distance from `xi` to the complement of the band (0 outside).
    pub fn dist(&self, xi: f64) -> f64 {
        if xi < self.lo || xi > self.hi {
            0.0
        } else {
            (xi - self.lo).min(self.hi - xi)
        }
    }

    /// `∫_lo^y dist(t)^p dt` for `y` clamped into the band.
    pub fn partial_integral(&self, y: f64, p: f64) -> f64 {
        let y = y.clamp(self.lo, self.hi);
        let mid = self.mid();
        if y <= mid {
            (y - self.lo).powf(p + 1.0) / (p + 1.0)
        } else {
            self.full_integral(p) - (self.hi - y).powf(p + 1.0) / (p + 1.0)
        }
    }

    pub fn full_integral(&self, p: f64) -> f64 {
        2.0 * (0.5 * self.width()).powf(p + 1.0) / (p + 1.0)
    }
}

const EXACT_LIMIT: u64 = 1 << 62;

fn table() -> &'static [Band] {
    static TABLE: OnceLock<Vec<Band>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut bands = Vec::new();
        // k! tracked exactly while (k+1)! <= 2^62, then in floating point.
        let mut fact_exact: Option<u64> = Some(1);
        let mut fact_float = 1.0_f64;
        for k in 1u32.. {
            let (lo, hi) = match fact_exact {
                Some(f) => match f.checked_mul(u64::from(k) + 1) {
                    Some(next) if next <= EXACT_LIMIT => {
                        fact_exact = Some(next);
                        fact_float = next as f64;
                        ((f * u64::from(k)) as f64, next as f64)
                    }
                    _ => {
                        fact_exact = None;
                        let f = f as f64;
                        fact_float = f * (f64::from(k) + 1.0);
                        (f * f64::from(k), fact_float)
                    }
                },
                None => {
                    let f = fact_float;
                    fact_float = f * (f64::from(k) + 1.0);
                    (f * f64::from(k), fact_float)
                }
            };
            if !hi.is_finite() {
                break;
            }
            bands.push(Band { k, lo, hi });
        }
        bands
    })
}

/// All representable bands in increasing order.
pub fn bands() -> &'static [Band] {
    table()
}

/// Result of locating `xi` among the bands.
#[derive(Debug, Clone, Copy)]
pub struct Lookup {
    pub band: Option<Band>,
    /// Bands inspected before the scan stopped.
    pub inspected: usize,
}

/// Scans bands in order, stopping at the first band that starts beyond `xi`.
pub fn locate(xi: f64) -> Lookup {
    let mut inspected = 0;
    for band in table() {
        inspected += 1;
        if band.lo > xi {
            break;
        }
        if xi <= band.hi {
            return Lookup {
                band: Some(*band),
                inspected,
            };
        }
    }
    Lookup {
        band: None,
        inspected,
    }
}

/// `Σ_k dist(xi, R \ [k!k, (k+1)!])^p`; at most one term is non-zero.
pub fn distosc(xi: f64, p: f64) -> f64 {
    match locate(xi).band {
        Some(b) => {
            let d = b.dist(xi);
            if d == 0.0 {
                0.0
            } else {
                d.powf(p)
            }
        }
        None => 0.0,
    }
}

/// Cumulative full-band integrals: `cum[i] = Σ_{j<i} ∫ band_j dist^p`.
pub fn cumulative_integrals(p: f64) -> Vec<f64> {
    let mut cum = Vec::with_capacity(table().len() + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for b in table() {
        acc += b.full_integral(p);
        cum.push(acc);
    }
    cum
}

/// `∫_0^xi distosc(t, p) dt`, using precomputed cumulative sums when given.
pub fn distosc_primitive(xi: f64, p: f64, cum: Option<&[f64]>) -> f64 {
    if xi <= 0.0 {
        // the integrand vanishes on (-inf, 1)
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, b) in table().iter().enumerate() {
        if b.lo >= xi {
            break;
        }
        if b.hi <= xi {
            if cum.is_none() {
                acc += b.full_integral(p);
            }
            continue;
        }
        let base = cum.map_or(acc, |c| c[i]);
        return base + b.partial_integral(xi, p);
    }
    match cum {
        Some(c) => {
            let n = table().iter().take_while(|b| b.hi <= xi).count();
            c[n]
        }
        None => acc,
    }
}

/// Band end points and midpoints strictly inside `(lo, hi)`.
pub fn kinks_between(lo: f64, hi: f64, out: &mut Vec<f64>) {
    for b in table() {
        if b.lo >= hi {
            break;
        }
        for v in [b.lo, b.mid(), b.hi] {
            if v > lo && v < hi {
                out.push(v);
            }
        }
    }
}
