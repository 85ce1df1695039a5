use super::{GeometryError, Mat4, MetricJet, SpacetimeProvider, Vec4};
use crate::jet::Jet;

type MetricFn = dyn Fn(&Vec4) -> Mat4 + Send + Sync;
type TimeFn = dyn Fn(&Vec4) -> f64 + Send + Sync;

/// Reduced-accuracy provider for metrics given only by their components.
///
/// First and second partials come from central differences with step `h`, so curvature carries
/// an `O(h²)` error plus roundoff of order `ε/h²`.
pub struct FiniteDifferenceProvider {
    name: String,
    metric: Box<MetricFn>,
    time: Option<Box<TimeFn>>,
    pub step: f64,
}

impl FiniteDifferenceProvider {
    pub fn new(
        name: impl Into<String>,
        step: f64,
        metric: impl Fn(&Vec4) -> Mat4 + Send + Sync + 'static,
    ) -> Self {
        FiniteDifferenceProvider {
            name: name.into(),
            metric: Box::new(metric),
            time: None,
            step,
        }
    }

    pub fn with_time_function(
        mut self,
        time: impl Fn(&Vec4) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.time = Some(Box::new(time));
        self
    }

    fn shifted(&self, x: &Vec4, shifts: &[(usize, f64)]) -> Mat4 {
        let mut y = *x;
        for &(i, d) in shifts {
            y[i] += d;
        }
        (self.metric)(&y)
    }
}

impl SpacetimeProvider for FiniteDifferenceProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn metric_jet(&self, x: &Vec4) -> Result<MetricJet, GeometryError> {
        let h = self.step;
        let g = (self.metric)(x);
        let mut out = MetricJet {
            g,
            dg: [[[0.0; 4]; 4]; 4],
            ddg: [[[[0.0; 4]; 4]; 4]; 4],
        };
        for k in 0..4 {
            let p = self.shifted(x, &[(k, h)]);
            let m = self.shifted(x, &[(k, -h)]);
            for a in 0..4 {
                for b in 0..4 {
                    out.dg[k][a][b] = (p[a][b] - m[a][b]) / (2.0 * h);
                    out.ddg[k][k][a][b] = (p[a][b] - 2.0 * g[a][b] + m[a][b]) / (h * h);
                }
            }
            for l in (k + 1)..4 {
                let pp = self.shifted(x, &[(k, h), (l, h)]);
                let pm = self.shifted(x, &[(k, h), (l, -h)]);
                let mp = self.shifted(x, &[(k, -h), (l, h)]);
                let mm = self.shifted(x, &[(k, -h), (l, -h)]);
                for a in 0..4 {
                    for b in 0..4 {
                        let v = (pp[a][b] - pm[a][b] - mp[a][b] + mm[a][b]) / (4.0 * h * h);
                        out.ddg[k][l][a][b] = v;
                        out.ddg[l][k][a][b] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    fn time_function(&self, x: &Vec4) -> Option<Jet> {
        let t = self.time.as_ref()?;
        let h = self.step;
        let mut jet = Jet::constant(t(x));
        for k in 0..4 {
            let mut p = *x;
            let mut m = *x;
            p[k] += h;
            m[k] -= h;
            let (tp, tm) = (t(&p), t(&m));
            jet.grad[k] = (tp - tm) / (2.0 * h);
            jet.hess[k][k] = (tp - 2.0 * jet.value + tm) / (h * h);
            for l in (k + 1)..4 {
                let shift = |dk: f64, dl: f64| {
                    let mut y = *x;
                    y[k] += dk;
                    y[l] += dl;
                    t(&y)
                };
                let v = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                jet.hess[k][l] = v;
                jet.hess[l][k] = v;
            }
        }
        Some(jet)
    }

    fn reduced_accuracy(&self) -> bool {
        true
    }
}
