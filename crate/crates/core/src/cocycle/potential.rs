use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Value and first two derivatives of a potential at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

type CustomFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Cos,
    ShiftedCos { shift: f64 },
    Trig { a: f64, b: f64 },
    Constant(f64),
    Spline(PeriodicSpline),
    Scaled(Box<Potential>, f64),
    Custom(CustomFn),
}

/// A 1-periodic real function with analytic first and second derivatives.
#[derive(Clone)]
pub struct Potential {
    name: String,
    kind: Kind,
    extrema: Option<[f64; 2]>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("extrema", &self.extrema)
            .finish()
    }
}

impl Potential {
    /// `v(x) = cos(2πx)`, maximum at 0 and minimum at 1/2.
    pub fn cos() -> Self {
        Potential { name: "cos".into(), kind: Kind::Cos, extrema: Some([0.0, 0.5]) }
    }

    /// `v(x) = cos(2π(x + shift))`.
    pub fn shifted_cos(shift: f64) -> Self {
        let z0 = (-shift).rem_euclid(1.0);
        Potential {
            name: format!("shifted-cos({shift})"),
            kind: Kind::ShiftedCos { shift },
            extrema: Some([z0, (z0 + 0.5).rem_euclid(1.0)]),
        }
    }

    /// `v(x) = cos(2πx) + a·cos(4πx) + b·cos(6πx)`.
    ///
    /// Extrema are declared at 0 and 1/2; they are the only critical points
    /// when the perturbation is small (`4|a| + 9|b| < 1` suffices).
    pub fn trig(a: f64, b: f64) -> Result<Self> {
        if 4.0 * a.abs() + 9.0 * b.abs() >= 1.0 {
            return Err(Error::Config(format!(
                "trig({a}, {b}) may have more than two critical points; need 4|a| + 9|b| < 1"
            )));
        }
        Ok(Potential { name: format!("trig({a},{b})"), kind: Kind::Trig { a, b }, extrema: Some([0.0, 0.5]) })
    }

    /// A constant potential; it has no nondegenerate extrema.
    pub fn constant(c: f64) -> Self {
        Potential { name: format!("const({c})"), kind: Kind::Constant(c), extrema: None }
    }

    /// Periodic cubic spline through tabulated samples on `[0, 1)`.
    pub fn spline(xs: &[f64], vs: &[f64]) -> Result<Self> {
        let sp = PeriodicSpline::new(xs, vs)?;
        let mut p = Potential { name: "spline".into(), kind: Kind::Spline(sp), extrema: None };
        p.extrema = p.find_extrema(4096);
        Ok(p)
    }

    /// Reads a two-column `x v(x)` text file (whitespace or comma separated,
    /// `#` comments) and builds a periodic spline.
    pub fn spline_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!("{}:{}: expected two columns", path.display(), lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("{}:{}: bad number `{s}`", path.display(), lineno + 1)))
            };
            xs.push(parse(cols[0])?);
            vs.push(parse(cols[1])?);
        }
        let mut p = Potential::spline(&xs, &vs)?;
        p.name = format!("spline({})", path.display());
        Ok(p)
    }

    /// `c · v(x)`, keeping the extrema of `v` when `c ≠ 0`.
    pub fn scaled(self, c: f64) -> Self {
        let extrema = if c != 0.0 { self.extrema } else { None };
        Potential { name: format!("{c}*{}", self.name), kind: Kind::Scaled(Box::new(self), c), extrema }
    }

    /// Wraps an arbitrary closure. The closure must be 1-periodic.
    pub fn custom<F>(name: &str, f: F, extrema: Option<[f64; 2]>) -> Self
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        Potential { name: name.into(), kind: Kind::Custom(Arc::new(f)), extrema }
    }

    /// Parses the names produced by [`Potential::name`]: `cos`,
    /// `shifted-cos(s)`, `trig(a,b)`, `const(c)`, `spline(path)` and a
    /// scaled `c*name` of any of these.
    pub fn by_name(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::Config(format!("unknown potential `{spec}`"));
        if spec == "cos" {
            return Ok(Potential::cos());
        }
        if let Some((c, inner)) = spec.split_once('*') {
            if let Ok(c) = c.trim().parse::<f64>() {
                return Ok(Potential::by_name(inner)?.scaled(c));
            }
        }
        let (head, rest) = spec.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums = || -> Result<Vec<f64>> {
            args.split(',').map(|a| a.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        match (head, nums()) {
            ("shifted-cos", Ok(v)) if v.len() == 1 => Ok(Potential::shifted_cos(v[0])),
            ("trig", Ok(v)) if v.len() == 2 => Potential::trig(v[0], v[1]),
            ("const", Ok(v)) if v.len() == 1 => Ok(Potential::constant(v[0])),
            ("spline", _) => Potential::spline_from_file(Path::new(args)),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn extrema(&self) -> Option<[f64; 2]> {
        self.extrema
    }

    /// Declares extrema after checking `v′ = 0 ± 1e−8` and `v″ ≠ 0` there.
    pub fn with_extrema(mut self, z: [f64; 2]) -> Result<Self> {
        for &zj in &z {
            let j = self.jet(zj);
            if j.dv.abs() > 1e-8 || j.d2v.abs() < 1e-8 {
                return Err(Error::MissingExtrema);
            }
        }
        self.extrema = Some(z);
        Ok(self)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Cos => (TAU * x).cos(),
            Kind::ShiftedCos { shift } => (TAU * (x + shift)).cos(),
            Kind::Trig { a, b } => {
                let y = TAU * x;
                y.cos() + a * (2.0 * y).cos() + b * (3.0 * y).cos()
            }
            Kind::Constant(c) => *c,
            Kind::Spline(s) => s.eval(x).v,
            Kind::Scaled(p, c) => c * p.value(x),
            Kind::Custom(f) => f(x).v,
        }
    }

    pub fn jet(&self, x: f64) -> Jet {
        match &self.kind {
            Kind::Cos => cos_jet(x),
            Kind::ShiftedCos { shift } => cos_jet(x + shift),
            Kind::Trig { a, b } => {
                let y = TAU * x;
                let w2 = TAU * TAU;
                Jet {
                    v: y.cos() + a * (2.0 * y).cos() + b * (3.0 * y).cos(),
                    dv: -TAU * (y.sin() + 2.0 * a * (2.0 * y).sin() + 3.0 * b * (3.0 * y).sin()),
                    d2v: -w2 * (y.cos() + 4.0 * a * (2.0 * y).cos() + 9.0 * b * (3.0 * y).cos()),
                }
            }
            Kind::Constant(c) => Jet { v: *c, dv: 0.0, d2v: 0.0 },
            Kind::Spline(s) => s.eval(x),
            Kind::Scaled(p, c) => {
                let j = p.jet(x);
                Jet { v: c * j.v, dv: c * j.dv, d2v: c * j.d2v }
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// `(inf v, sup v)` estimated on a fine grid and polished at the
    /// declared extrema.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let m = 4096;
        for i in 0..m {
            let v = self.value(i as f64 / m as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if let Some(z) = self.extrema {
            for zj in z {
                let v = self.value(zj);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Critical points located from sign changes of `v′`, returned only when
    /// there are exactly two and both are nondegenerate.
    fn find_extrema(&self, grid: usize) -> Option<[f64; 2]> {
        let mut found = Vec::new();
        let h = 1.0 / grid as f64;
        for i in 0..grid {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (fa, fb) = (self.jet(a).dv, self.jet(b).dv);
            if fa == 0.0 || fa.signum() != fb.signum() {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.jet(mid).dv;
                    if (fm > 0.0) == (flo > 0.0) && fm != 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                found.push(0.5 * (lo + hi));
            }
        }
        if found.len() == 2 && found.iter().all(|&z| self.jet(z).d2v.abs() > 1e-8) {
            Some([found[0].rem_euclid(1.0), found[1].rem_euclid(1.0)])
        } else {
            None
        }
    }
}

fn cos_jet(x: f64) -> Jet {
    let (s, c) = (TAU * x).sin_cos();
    Jet { v: c, dv: -TAU * s, d2v: -TAU * TAU * c }
}

/// Periodic C² cubic spline on `[0, 1)`.
#[derive(Debug, Clone)]
struct PeriodicSpline {
    xs: Vec<f64>,
    vs: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    fn new(xs: &[f64], vs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 4 || vs.len() != n {
            return Err(Error::Config("spline table needs at least 4 rows".into()));
        }
        let mut pts: Vec<(f64, f64)> = xs.iter().map(|x| x.rem_euclid(1.0)).zip(vs.iter().copied()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 - w[0].0 <= 0.0) {
            return Err(Error::Config("spline nodes must be distinct modulo 1".into()));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let h: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { xs[i + 1] - xs[i] } else { xs[0] + 1.0 - xs[n - 1] })
            .collect();
        // cyclic tridiagonal system for second derivatives m_i:
        // h_{i-1} m_{i-1} + 2(h_{i-1}+h_i) m_i + h_i m_{i+1} = 6(d_i − d_{i−1})
        let d: Vec<f64> = (0..n).map(|i| (vs[(i + 1) % n] - vs[i]) / h[i]).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            a[i] = hp;
            b[i] = 2.0 * (hp + h[i]);
            c[i] = h[i];
            r[i] = 6.0 * (d[i] - d[(i + n - 1) % n]);
        }
        let m = solve_cyclic(&a, &b, &c, &r);
        Ok(PeriodicSpline { xs, vs, m })
    }

    fn eval(&self, x: f64) -> Jet {
        let n = self.xs.len();
        let x = x.rem_euclid(1.0);
        let i = match self.xs.partition_point(|&xi| xi <= x) {
            0 => n - 1,
            k => k - 1,
        };
        let j = (i + 1) % n;
        let x0 = self.xs[i];
        let h = if j == 0 { self.xs[0] + 1.0 - x0 } else { self.xs[j] - x0 };
        let mut t = x - x0;
        if t < 0.0 {
            t += 1.0;
        }
        let u = h - t;
        let (mi, mj) = (self.m[i], self.m[j]);
        let (yi, yj) = (self.vs[i], self.vs[j]);
        let v = mi * u.powi(3) / (6.0 * h) + mj * t.powi(3) / (6.0 * h)
            + (yi / h - mi * h / 6.0) * u
            + (yj / h - mj * h / 6.0) * t;
        let dv = -mi * u * u / (2.0 * h) + mj * t * t / (2.0 * h) - (yi / h - mi * h / 6.0) + (yj / h - mj * h / 6.0);
        let d2v = (mi * u + mj * t) / h;
        Jet { v, dv, d2v }
    }
}

/// Sherman–Morrison reduction of a cyclic tridiagonal solve.
fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let x = solve_tridiag(a, &bb, c, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiag(a, &bb, c, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiag(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (r[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
