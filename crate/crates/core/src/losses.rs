//! Loss terms of the adaptation objective and their weighted combination
//!
//! `total = gan + λ1·ae + λ2·pred + λ3·cycle + λ4·percep`.

use serde::{Deserialize, Serialize};

use crate::dataio::DomainTag;
use crate::error::{Error, Result};
use crate::models::BoundBundle;
use crate::nn::{Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 100.0,
            lambda3: 0.1,
            lambda4: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::usage("loss weights must be finite and non-negative"))
        }
    }
}

/// Per-step values of the five terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub gan: f64,
    pub ae: f64,
    pub pred: f64,
    pub cycle: f64,
    pub percep: f64,
    pub total: f64,
}

pub const LOSS_CSV_HEADER: &str = "step,gan,ae,pred,cycle,percep,total";

impl LossReport {
    pub fn new(gan: f64, ae: f64, pred: f64, cycle: f64, percep: f64, weights: &LossWeights) -> Self {
        Self {
            gan,
            ae,
            pred,
            cycle,
            percep,
            total: total_loss([gan, ae, pred, cycle, percep], weights),
        }
    }

    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{},{},{}",
            self.gan, self.ae, self.pred, self.cycle, self.percep, self.total
        )
    }

    /// Parse a row written by [`LossReport::csv_row`].
    pub fn parse_csv_row(line: &str) -> Result<(usize, Self)> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 7 {
            return Err(Error::data(format!("loss row needs 7 fields, got {}", fields.len())));
        }
        let step = fields[0]
            .parse()
            .map_err(|_| Error::data(format!("bad step `{}`", fields[0])))?;
        let mut v = [0.0; 6];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| Error::data(format!("bad loss value `{f}`")))?;
        }
        Ok((
            step,
            Self {
                gan: v[0],
                ae: v[1],
                pred: v[2],
                cycle: v[3],
                percep: v[4],
                total: v[5],
            },
        ))
    }
}

/// Weighted sum of `[gan, ae, pred, cycle, percep]`.
pub fn total_loss(components: [f64; 5], w: &LossWeights) -> f64 {
    let [gan, ae, pred, cycle, percep] = components;
    gan + w.lambda1 * ae + w.lambda2 * pred + w.lambda3 * cycle + w.lambda4 * percep
}

/// Source and target domain of one adaptation pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRoles {
    pub source: DomainTag,
    pub target: DomainTag,
}

fn check_roles(b: &BoundBundle, roles: &DomainRoles) -> Result<()> {
    for d in [&roles.source, &roles.target] {
        if !b.generators.contains_key(d) || !b.discriminators.contains_key(d) {
            return Err(Error::usage(format!("domain `{d}` is not registered in the model")));
        }
    }
    Ok(())
}

/// Least-squares GAN terms in both directions, `(disc_loss, gen_loss)`.
///
/// Fakes are detached inside the discriminator loss, so it only carries
/// gradient into the discriminators.
pub fn gan_losses(g: &Graph, b: &BoundBundle, x_s: Var, x_t: Var, roles: &DomainRoles) -> Result<(Var, Var)> {
    check_roles(b, roles)?;
    let fake_t = b.generate(g, b.encode(g, x_s)?, &roles.target)?;
    let fake_s = b.generate(g, b.encode(g, x_t)?, &roles.source)?;
    let disc = disc_loss(g, b, x_s, x_t, fake_s, fake_t, roles)?;
    let gen = gen_loss(g, b, fake_s, fake_t, roles)?;
    Ok((disc, gen))
}

/// Least-squares discriminator objective for one domain:
/// `[(D(real) − 1)² + D(fake)²] / 2`, each averaged over the batch.
pub fn lsgan_disc(g: &Graph, real_score: Var, fake_score: Var) -> Result<Var> {
    let on_real = g.lsq(real_score, 1.0);
    let on_fake = g.lsq(fake_score, 0.0);
    Ok(g.scale(g.add(on_real, on_fake)?, 0.5))
}

/// Least-squares generator objective for one domain: `(D(fake) − 1)²`.
pub fn lsgan_gen(g: &Graph, fake_score: Var) -> Var {
    g.lsq(fake_score, 1.0)
}

pub(crate) fn disc_loss(
    g: &Graph,
    b: &BoundBundle,
    x_s: Var,
    x_t: Var,
    fake_s: Var,
    fake_t: Var,
    roles: &DomainRoles,
) -> Result<Var> {
    let mut terms = Vec::new();
    for (real, fake, d) in [(x_s, fake_s, &roles.source), (x_t, fake_t, &roles.target)] {
        let real_score = b.discriminate(g, real, d)?;
        let fake_score = b.discriminate(g, g.detach(fake), d)?;
        terms.push(lsgan_disc(g, real_score, fake_score)?);
    }
    g.add(terms[0], terms[1])
}

pub(crate) fn gen_loss(g: &Graph, b: &BoundBundle, fake_s: Var, fake_t: Var, roles: &DomainRoles) -> Result<Var> {
    let on_s = lsgan_gen(g, b.discriminate(g, fake_s, &roles.source)?);
    let on_t = lsgan_gen(g, b.discriminate(g, fake_t, &roles.target)?);
    g.add(on_s, on_t)
}

/// Reconstruction error of decode(encode(x)).
pub fn ae_loss(g: &Graph, b: &BoundBundle, x: Var) -> Result<Var> {
    let z = b.encode(g, x)?;
    g.mse(b.decode(g, z)?, x)
}

/// Squared polar-vector error `(dl − dl')² + wrap(dpsi − dpsi')²` averaged
/// over the batch, for predictions and labels of shape `[batch, 2]`.
pub fn polar_mse(g: &Graph, pred: Var, labels: Var) -> Result<Var> {
    let diff = g.sub(pred, labels)?;
    let dl = g.slice(diff, 0, 1)?;
    let dpsi = g.wrap_angle(g.slice(diff, 1, 2)?);
    Ok(g.scale(g.lsq(g.concat(&[dl, dpsi])?, 0.0), 2.0))
}

pub fn pred_loss(g: &Graph, b: &BoundBundle, x_s: Var, y_s: Var) -> Result<Var> {
    let z = b.encode(g, x_s)?;
    polar_mse(g, b.predict(g, z)?, y_s)
}

/// Source → target → source and target → source → target reconstruction.
pub fn cycle_loss(g: &Graph, b: &BoundBundle, x_s: Var, x_t: Var, roles: &DomainRoles) -> Result<Var> {
    check_roles(b, roles)?;
    let fake_t = b.generate(g, b.encode(g, x_s)?, &roles.target)?;
    let fake_s = b.generate(g, b.encode(g, x_t)?, &roles.source)?;
    cycle_from_fakes(g, b, x_s, x_t, fake_s, fake_t, roles)
}

fn cycle_from_fakes(
    g: &Graph,
    b: &BoundBundle,
    x_s: Var,
    x_t: Var,
    fake_s: Var,
    fake_t: Var,
    roles: &DomainRoles,
) -> Result<Var> {
    let back_s = b.generate(g, b.encode(g, fake_t)?, &roles.source)?;
    let back_t = b.generate(g, b.encode(g, fake_s)?, &roles.target)?;
    g.add(g.mse(back_s, x_s)?, g.mse(back_t, x_t)?)
}

/// Latent codes preserved under translation, against detached reference
/// codes.
pub fn percep_loss(g: &Graph, b: &BoundBundle, x_s: Var, x_t: Var, roles: &DomainRoles) -> Result<Var> {
    check_roles(b, roles)?;
    let z_s = b.encode(g, x_s)?;
    let z_t = b.encode(g, x_t)?;
    let fake_t = b.generate(g, z_s, &roles.target)?;
    let fake_s = b.generate(g, z_t, &roles.source)?;
    percep_from(g, z_s, z_t, b.encode(g, fake_t)?, b.encode(g, fake_s)?)
}

fn percep_from(g: &Graph, z_s: Var, z_t: Var, z_fake_t: Var, z_fake_s: Var) -> Result<Var> {
    g.add(g.mse(z_fake_t, g.detach(z_s))?, g.mse(z_fake_s, g.detach(z_t))?)
}

/// Which terms a generator-side step computes. Skipped terms report zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermMask {
    pub gan: bool,
    pub ae: bool,
    pub pred: bool,
    pub cycle: bool,
    pub percep: bool,
}

impl TermMask {
    pub const ALL: Self = Self {
        gan: true,
        ae: true,
        pred: true,
        cycle: true,
        percep: true,
    };
    pub const PRED_ONLY: Self = Self {
        gan: false,
        ae: false,
        pred: true,
        cycle: false,
        percep: false,
    };

    fn needs_translation(&self) -> bool {
        self.gan || self.cycle || self.percep
    }
}

/// Generator-side terms with shared intermediate results.
pub struct GeneratorTerms {
    pub gan: Option<Var>,
    pub ae: Option<Var>,
    pub pred: Option<Var>,
    pub cycle: Option<Var>,
    pub percep: Option<Var>,
}

impl GeneratorTerms {
    pub fn compute(
        g: &Graph,
        b: &BoundBundle,
        x_s: Var,
        y_s: Var,
        x_t: Var,
        roles: &DomainRoles,
        mask: TermMask,
    ) -> Result<Self> {
        check_roles(b, roles)?;
        let z_s = b.encode(g, x_s)?;
        let pred = if mask.pred {
            Some(polar_mse(g, b.predict(g, z_s)?, y_s)?)
        } else {
            None
        };
        let needs_target = mask.ae || mask.needs_translation();
        let z_t = if needs_target { Some(b.encode(g, x_t)?) } else { None };
        let ae = match (mask.ae, z_t) {
            (true, Some(z_t)) => Some(g.add(g.mse(b.decode(g, z_s)?, x_s)?, g.mse(b.decode(g, z_t)?, x_t)?)?),
            _ => None,
        };
        let (mut gan, mut cycle, mut percep) = (None, None, None);
        if let (true, Some(z_t)) = (mask.needs_translation(), z_t) {
            let fake_t = b.generate(g, z_s, &roles.target)?;
            let fake_s = b.generate(g, z_t, &roles.source)?;
            if mask.gan {
                gan = Some(gen_loss(g, b, fake_s, fake_t, roles)?);
            }
            if mask.cycle || mask.percep {
                let z_fake_t = b.encode(g, fake_t)?;
                let z_fake_s = b.encode(g, fake_s)?;
                if mask.cycle {
                    let back_s = b.generate(g, z_fake_t, &roles.source)?;
                    let back_t = b.generate(g, z_fake_s, &roles.target)?;
                    cycle = Some(g.add(g.mse(back_s, x_s)?, g.mse(back_t, x_t)?)?);
                }
                if mask.percep {
                    percep = Some(percep_from(g, z_s, z_t, z_fake_t, z_fake_s)?);
                }
            }
        }
        Ok(Self {
            gan,
            ae,
            pred,
            cycle,
            percep,
        })
    }

    /// Weighted objective as a graph value.
    pub fn total(&self, g: &Graph, w: &LossWeights) -> Result<Var> {
        let parts = [
            (self.gan, 1.0),
            (self.ae, w.lambda1),
            (self.pred, w.lambda2),
            (self.cycle, w.lambda3),
            (self.percep, w.lambda4),
        ];
        let mut acc: Option<Var> = None;
        for (v, weight) in parts {
            let Some(v) = v else { continue };
            let term = g.scale(v, weight);
            acc = Some(match acc {
                None => term,
                Some(a) => g.add(a, term)?,
            });
        }
        acc.ok_or_else(|| Error::usage("no loss terms selected"))
    }

    pub fn report(&self, g: &Graph, w: &LossWeights) -> LossReport {
        let v = |x: Option<Var>| x.map_or(0.0, |x| g.item(x));
        LossReport::new(v(self.gan), v(self.ae), v(self.pred), v(self.cycle), v(self.percep), w)
    }
}
