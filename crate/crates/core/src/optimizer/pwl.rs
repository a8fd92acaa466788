//! Convex piecewise-linear functions on a closed interval.

const LEN_TOL: f64 = 1e-13;
const SLOPE_TOL: f64 = 1e-13;
const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub len: f64,
    pub slope: f64,
}

/// `f` on `[start, start + Σ len]`, slopes non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvexPwl {
    pub start: f64,
    pub value: f64,
    pub segs: Vec<Segment>,
}

impl ConvexPwl {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        let mut f = Self { start: lo, value, segs: Vec::new() };
        f.push(hi - lo, 0.0);
        f
    }

    pub fn end(&self) -> f64 {
        self.start + self.segs.iter().map(|s| s.len).sum::<f64>()
    }

    /// Appends a segment, fusing it with the previous one when slopes agree.
    pub fn push(&mut self, len: f64, slope: f64) {
        if len <= LEN_TOL {
            return;
        }
        if let Some(last) = self.segs.last_mut() {
            debug_assert!(slope >= last.slope - 1e-9, "non-convex push {slope} after {}", last.slope);
            if (slope - last.slope).abs() <= SLOPE_TOL * (1.0 + slope.abs()) {
                last.len += len;
                return;
            }
        }
        self.segs.push(Segment { len, slope });
    }

    /// Value at `x`, clamping points within round-off of the domain; `None` outside.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let end = self.end();
        if x < self.start - DOMAIN_TOL || x > end + DOMAIN_TOL {
            return None;
        }
        let mut rem = (x - self.start).max(0.0);
        let mut v = self.value;
        for s in &self.segs {
            if rem <= s.len {
                return Some(v + rem * s.slope);
            }
            v += s.len * s.slope;
            rem -= s.len;
        }
        Some(v)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        let mut x = self.start;
        std::iter::once(self.start).chain(self.segs.iter().map(move |s| {
            x += s.len;
            x
        }))
    }

    /// `g(u) = f(−u)`.
    pub fn mirrored(&self) -> Self {
        let end = self.end();
        let mut g = Self {
            start: -end,
            value: self.eval(end).expect("end in domain"),
            segs: Vec::with_capacity(self.segs.len()),
        };
        for s in self.segs.iter().rev() {
            g.push(s.len, -s.slope);
        }
        g
    }

    /// `(f □ g)(b) = min_{y+u=b} f(y) + g(u)`.
    pub fn inf_convolve(&self, other: &Self) -> Self {
        let mut out = Self {
            start: self.start + other.start,
            value: self.value + other.value,
            segs: Vec::with_capacity(self.segs.len() + other.segs.len()),
        };
        let (mut i, mut j) = (0, 0);
        while i < self.segs.len() || j < other.segs.len() {
            let take_self = match (self.segs.get(i), other.segs.get(j)) {
                (Some(a), Some(b)) => a.slope <= b.slope,
                (Some(_), None) => true,
                _ => false,
            };
            let s = if take_self {
                i += 1;
                self.segs[i - 1]
            } else {
                j += 1;
                other.segs[j - 1]
            };
            out.push(s.len, s.slope);
        }
        out
    }

    /// Restriction to `[lo, hi]`; `None` if the intersection is empty.
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Self> {
        let a = lo.max(self.start);
        let b = hi.min(self.end());
        if a > b + DOMAIN_TOL {
            return None;
        }
        let b = b.max(a);
        let mut out = Self { start: a, value: self.eval(a)?, segs: Vec::new() };
        let mut x = self.start;
        for s in &self.segs {
            let (s0, s1) = (x, x + s.len);
            x = s1;
            let len = s1.min(b) - s0.max(a);
            if len > 0.0 {
                out.push(len, s.slope);
            }
        }
        Some(out)
    }
}
