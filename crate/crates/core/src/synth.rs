//! Synthetic scenes standing in for a perfect building detector, a noise
//! model that turns them into imperfect detections, and the tamper sequence
//! used to probe classifier robustness.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BBox, SceneRecord, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutStyle {
    /// Buildings side by side along a street front.
    Row,
    /// Buildings scattered around a common centre.
    Cluster,
    /// One large building with smaller ones around it.
    SingleDominant,
}

impl LayoutStyle {
    fn name(self) -> &'static str {
        match self {
            LayoutStyle::Row => "row",
            LayoutStyle::Cluster => "cluster",
            LayoutStyle::SingleDominant => "single-dominant",
        }
    }
}

/// Normalized width range and height/width aspect range of one building category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapePrior {
    pub width: [f64; 2],
    pub aspect: [f64; 2],
}

impl Default for ShapePrior {
    fn default() -> Self {
        Self { width: [0.08, 0.2], aspect: [0.6, 1.4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub landuse: String,
    /// Probability of each building category; unlisted categories have 0.
    pub building_mix: BTreeMap<String, f64>,
    pub count_range: [usize; 2],
    pub layout_style: LayoutStyle,
    /// Per building category; categories without an entry use `default_shape`.
    #[serde(default)]
    pub shapes: BTreeMap<String, ShapePrior>,
    #[serde(default)]
    pub default_shape: ShapePrior,
}

/// Geographic prior: scenes of each land use scatter around their own district.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPrior {
    pub center: [f64; 2],
    /// Distance of each district from the centre, degrees.
    pub district_offset: f64,
    /// Half-width of the scatter inside a district, degrees.
    pub spread: f64,
}

/// Contents of a template file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub image_width: u32,
    pub image_height: u32,
    /// Upper bound on boxes per scene (the encoder length).
    pub max_boxes: usize,
    #[serde(default)]
    pub geo: Option<GeoPrior>,
    pub templates: Vec<SceneTemplate>,
}

fn shape(width: [f64; 2], aspect: [f64; 2]) -> ShapePrior {
    ShapePrior { width, aspect }
}

fn template(
    landuse: &str,
    mix: &[(&str, f64)],
    count: [usize; 2],
    style: LayoutStyle,
    shapes: &[(&str, ShapePrior)],
) -> SceneTemplate {
    SceneTemplate {
        landuse: landuse.into(),
        building_mix: mix.iter().map(|(n, p)| (n.to_string(), *p)).collect(),
        count_range: count,
        layout_style: style,
        shapes: shapes.iter().map(|(n, s)| (n.to_string(), *s)).collect(),
        default_shape: ShapePrior::default(),
    }
}

impl Default for SynthConfig {
    /// Four templates with pairwise disjoint building mixes. Each building
    /// category `c` sits in a different land use than `(c + 1) mod 8`.
    fn default() -> Self {
        Self {
            image_width: 640,
            image_height: 640,
            max_boxes: 25,
            geo: Some(GeoPrior { center: [51.0447, -114.0719], district_offset: 0.06, spread: 0.04 }),
            templates: vec![
                template(
                    "commercial",
                    &[("retail", 0.6), ("garage", 0.4)],
                    [3, 8],
                    LayoutStyle::Row,
                    &[("retail", shape([0.1, 0.22], [0.5, 1.0])), ("garage", shape([0.12, 0.25], [0.4, 0.8]))],
                ),
                template(
                    "residential",
                    &[("house", 0.65), ("apartment", 0.35)],
                    [3, 8],
                    LayoutStyle::Row,
                    &[("house", shape([0.08, 0.16], [0.8, 1.3])), ("apartment", shape([0.12, 0.22], [1.0, 1.8]))],
                ),
                template(
                    "public",
                    &[("church", 0.45), ("office building", 0.55)],
                    [2, 6],
                    LayoutStyle::SingleDominant,
                    &[("church", shape([0.15, 0.3], [1.2, 2.2])), ("office building", shape([0.1, 0.2], [1.0, 2.0]))],
                ),
                template(
                    "industrial",
                    &[("industrial", 0.6), ("roof", 0.4)],
                    [2, 6],
                    LayoutStyle::Cluster,
                    &[("industrial", shape([0.2, 0.4], [0.3, 0.6])), ("roof", shape([0.15, 0.3], [0.2, 0.5]))],
                ),
            ],
        }
    }
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    fn resolve(&self) -> Result<Vec<Resolved>> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        let mut by_landuse: Vec<Option<Resolved>> = vec![None; Taxonomy::NUM_LANDUSES];
        for t in &self.templates {
            let landuse = Taxonomy::landuse_index(&t.landuse)?;
            if by_landuse[landuse].is_some() {
                return Err(Error::Config(format!("duplicate template for `{}`", t.landuse)));
            }
            by_landuse[landuse] = Some(Resolved::new(t, landuse, self.max_boxes)?);
        }
        by_landuse
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| Error::Config(format!("missing template for `{}`", Taxonomy::landuse_name(i))))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Resolved {
    landuse: usize,
    mix: WeightedIndex<f64>,
    mix_weights: [f64; Taxonomy::NUM_BUILDINGS],
    count: [usize; 2],
    style: LayoutStyle,
    shapes: [ShapePrior; Taxonomy::NUM_BUILDINGS],
}

impl Resolved {
    fn new(t: &SceneTemplate, landuse: usize, max_boxes: usize) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("template `{}`: {m}", t.landuse));
        let mut weights = [0.0; Taxonomy::NUM_BUILDINGS];
        for (name, &p) in &t.building_mix {
            if !(p >= 0.0) {
                return Err(bad(format!("negative probability for `{name}`")));
            }
            weights[Taxonomy::building_index(name)?] = p;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("building mix sums to {total}, not 1")));
        }
        let [lo, hi] = t.count_range;
        if lo > hi || hi > max_boxes || hi == 0 {
            return Err(bad(format!("count range [{lo}, {hi}] must satisfy min <= max <= {max_boxes}, max > 0")));
        }
        let mut shapes = [t.default_shape; Taxonomy::NUM_BUILDINGS];
        for (name, s) in &t.shapes {
            shapes[Taxonomy::building_index(name)?] = *s;
        }
        for s in &shapes {
            if !(s.width[0] > 0.0
                && s.width[0] <= s.width[1]
                && s.width[1] <= 1.0
                && s.aspect[0] > 0.0
                && s.aspect[0] <= s.aspect[1])
            {
                return Err(bad(format!("invalid shape prior {s:?}")));
            }
        }
        if t.layout_style == LayoutStyle::Row {
            let narrowest = (0..Taxonomy::NUM_BUILDINGS)
                .filter(|&c| weights[c] > 0.0)
                .map(|c| shapes[c].width[0])
                .fold(f64::INFINITY, f64::min);
            if hi as f64 * narrowest > 1.0 {
                return Err(Error::ImpossiblePlacement {
                    count: hi,
                    style: t.layout_style.name().into(),
                    reason: format!("{hi} boxes of width >= {narrowest} do not fit in one row"),
                });
            }
        }
        let mix = WeightedIndex::new(weights).map_err(|e| bad(e.to_string()))?;
        Ok(Self { landuse, mix, mix_weights: weights, count: t.count_range, style: t.layout_style, shapes })
    }

    fn scene(&self, rng: &mut ChaCha8Rng) -> Vec<BBox> {
        let n = rng.gen_range(self.count[0]..=self.count[1]);
        let mut sized: Vec<(usize, f64, f64)> = (0..n)
            .map(|_| {
                let c = self.mix.sample(rng);
                let s = &self.shapes[c];
                let w = sample_range(rng, s.width);
                let h = (w * sample_range(rng, s.aspect)).min(0.95);
                (c, w, h)
            })
            .collect();
        let placed = match self.style {
            LayoutStyle::Row => place_row(rng, &mut sized),
            LayoutStyle::Cluster => place_cluster(rng, &sized, 0.2),
            LayoutStyle::SingleDominant => {
                if let Some(first) = sized.first_mut() {
                    first.1 = (first.1 * 2.0).min(0.6);
                    first.2 = (first.2 * 2.0).min(0.9);
                }
                place_cluster(rng, &sized, 0.3)
            }
        };
        placed
    }
}

fn sample_range(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn clamp_box(c: usize, x: f64, y: f64, w: f64, h: f64) -> BBox {
    let w = w.clamp(1e-4, 1.0);
    let h = h.clamp(1e-4, 1.0);
    BBox::new(c, 1.0, x.clamp(0.0, 1.0 - w), y.clamp(0.0, 1.0 - h), w, h)
}

fn place_row(rng: &mut ChaCha8Rng, sized: &mut [(usize, f64, f64)]) -> Vec<BBox> {
    let total: f64 = sized.iter().map(|s| s.1).sum();
    if total > 0.98 {
        let k = 0.98 / total;
        for s in sized.iter_mut() {
            s.1 *= k;
            s.2 *= k;
        }
    }
    let free = 1.0 - sized.iter().map(|s| s.1).sum::<f64>();
    let cuts: Vec<f64> = (0..=sized.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let cut_sum: f64 = cuts.iter().sum();
    let baseline = rng.gen_range(0.6..0.85);
    let mut x = 0.0;
    let mut out = Vec::with_capacity(sized.len());
    for (i, &(c, w, h)) in sized.iter().enumerate() {
        x += free * cuts[i] / cut_sum;
        let y = baseline - h + rng.gen_range(-0.03..0.03);
        out.push(clamp_box(c, x, y, w, h));
        x += w;
    }
    out
}

fn place_cluster(rng: &mut ChaCha8Rng, sized: &[(usize, f64, f64)], radius: f64) -> Vec<BBox> {
    let (cx, cy) = (rng.gen_range(0.35..0.65), rng.gen_range(0.4..0.6));
    sized
        .iter()
        .enumerate()
        .map(|(i, &(c, w, h))| {
            let (ox, oy) =
                if i == 0 { (0.0, 0.0) } else { (rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)) };
            clamp_box(c, cx + ox - w / 2.0, cy + oy - h / 2.0, w, h)
        })
        .collect()
}

fn scene_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `n_per_category` labeled scenes per land use, in taxonomy order.
///
/// Scene `i` draws from its own generator stream, so any scene can be
/// regenerated independently. Boxes carry score 1.
pub fn generate(config: &SynthConfig, n_per_category: usize, seed: u64) -> Result<Vec<SceneRecord>> {
    let templates = config.resolve()?;
    let mut out = Vec::with_capacity(n_per_category * templates.len());
    for t in &templates {
        let name = Taxonomy::landuse_name(t.landuse);
        for i in 0..n_per_category {
            let mut rng = scene_rng(seed, (t.landuse * n_per_category + i) as u64);
            let boxes = t.scene(&mut rng);
            let geo = config.geo.map(|g| {
                let angle = std::f64::consts::FRAC_PI_2 * t.landuse as f64;
                let lat = g.center[0] + g.district_offset * angle.sin() + rng.gen_range(-g.spread..=g.spread);
                let lon = g.center[1] + g.district_offset * angle.cos() + rng.gen_range(-g.spread..=g.spread);
                (lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))
            });
            out.push(SceneRecord {
                scene_id: format!("{name}_{i:05}"),
                landuse: Some(t.landuse),
                width: config.image_width,
                height: config.image_height,
                lat: geo.map(|g| g.0),
                lon: geo.map(|g| g.1),
                boxes,
            });
        }
    }
    Ok(out)
}

/// Mixing weights of each land use's template, indexed `[landuse][building]`.
pub fn template_mixes(config: &SynthConfig) -> Result<Vec<[f64; Taxonomy::NUM_BUILDINGS]>> {
    Ok(config.resolve()?.into_iter().map(|r| r.mix_weights).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScoreModel {
    /// Keep the input score.
    Keep,
    Uniform {
        low: f64,
        high: f64,
    },
}

impl ScoreModel {
    fn sample(&self, rng: &mut ChaCha8Rng, current: f64) -> f64 {
        match *self {
            ScoreModel::Keep => current,
            ScoreModel::Uniform { low, high } if low < high => rng.gen_range(low..high),
            ScoreModel::Uniform { low, .. } => low,
        }
    }
}

/// Simulated detector imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mislabel_rate: f64,
    pub drop_rate: f64,
    pub correct_score: ScoreModel,
    pub mislabel_score: ScoreModel,
    /// Relative perturbation of position and extent.
    pub jitter_scale: f64,
}

impl NoiseModel {
    pub fn identity() -> Self {
        Self {
            mislabel_rate: 0.0,
            drop_rate: 0.0,
            correct_score: ScoreModel::Keep,
            mislabel_score: ScoreModel::Keep,
            jitter_scale: 0.0,
        }
    }

    /// Detector-like defaults with the given error rates.
    pub fn with_rates(mislabel_rate: f64, drop_rate: f64) -> Self {
        Self {
            mislabel_rate,
            drop_rate,
            correct_score: ScoreModel::Uniform { low: 0.5, high: 1.0 },
            mislabel_score: ScoreModel::Uniform { low: 0.3, high: 0.8 },
            jitter_scale: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        let score_ok = |s: &ScoreModel| match *s {
            ScoreModel::Keep => true,
            ScoreModel::Uniform { low, high } => 0.0 <= low && low <= high && high <= 1.0,
        };
        if !rate_ok(self.mislabel_rate)
            || !rate_ok(self.drop_rate)
            || !score_ok(&self.correct_score)
            || !score_ok(&self.mislabel_score)
            || !(self.jitter_scale >= 0.0)
        {
            return Err(Error::Config(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }
}

/// Turns ground-truth records into simulated detections.
///
/// Per box: dropped with `drop_rate`; otherwise relabeled to a uniformly
/// chosen wrong category with `mislabel_rate`, rescored from the matching
/// score model, and jittered. Record `i` uses generator stream `i`.
pub fn perturb(records: &[SceneRecord], noise: &NoiseModel, seed: u64) -> Result<Vec<SceneRecord>> {
    noise.validate()?;
    let wrong = Uniform::new(1, Taxonomy::NUM_BUILDINGS);
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut rng = scene_rng(seed, i as u64);
            let mut boxes = Vec::with_capacity(rec.boxes.len());
            for b in &rec.boxes {
                let dropped = rng.gen_bool(noise.drop_rate);
                let mislabeled = rng.gen_bool(noise.mislabel_rate);
                if dropped {
                    continue;
                }
                let mut out = *b;
                if mislabeled {
                    out.category = (b.category + wrong.sample(&mut rng)) % Taxonomy::NUM_BUILDINGS;
                    out.score = noise.mislabel_score.sample(&mut rng, b.score);
                } else {
                    out.score = noise.correct_score.sample(&mut rng, b.score);
                }
                if noise.jitter_scale > 0.0 {
                    let j = noise.jitter_scale;
                    let w = b.w * (1.0 + rng.gen_range(-j..=j));
                    let h = b.h * (1.0 + rng.gen_range(-j..=j));
                    let x = b.x + b.w * rng.gen_range(-j..=j);
                    let y = b.y + b.h * rng.gen_range(-j..=j);
                    out = BBox { category: out.category, score: out.score, ..clamp_box(0, x, y, w, h) };
                }
                boxes.push(out);
            }
            SceneRecord { boxes, ..rec.clone() }
        })
        .collect())
}

/// Deterministic wrong label used by [`tamper`].
pub fn tamper_label(category: usize) -> usize {
    (category + 1) % Taxonomy::NUM_BUILDINGS
}

/// Box lists for tamper steps `0..=k`: step `j` relabels the `j`
/// highest-scoring boxes (ties: input order) with [`tamper_label`].
pub fn tamper(boxes: &[BBox], k: usize) -> Result<Vec<Vec<BBox>>> {
    if k > boxes.len() {
        return Err(Error::TamperTooDeep { k, count: boxes.len() });
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score).then(a.cmp(&b)));
    let mut steps = Vec::with_capacity(k + 1);
    let mut current = boxes.to_vec();
    steps.push(current.clone());
    for &i in &order[..k] {
        current[i].category = tamper_label(current[i].category);
        steps.push(current.clone());
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Predicts the land use whose template mix gives the box categories the
    /// highest likelihood.
    fn frequency_oracle(mixes: &[[f64; 8]], boxes: &[BBox]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (l, mix) in mixes.iter().enumerate() {
            let ll: f64 = boxes.iter().map(|b| mix[b.category].max(1e-300).ln()).sum();
            if ll > best.0 {
                best = (ll, l);
            }
        }
        best.1
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, 50, 1).unwrap();
        assert_eq!(a, generate(&cfg, 50, 1).unwrap());
        assert_ne!(a, generate(&cfg, 50, 2).unwrap());
        assert_eq!(a.len(), 200);
        for r in &a {
            r.validate().unwrap();
            let t = &cfg.templates[r.landuse.unwrap()];
            assert!((t.count_range[0]..=t.count_range[1]).contains(&r.boxes.len()));
            assert!(r.boxes.iter().all(|b| b.score == 1.0 && b.w > 0.0 && b.h > 0.0));
        }
    }

    #[test]
    fn count_range_is_respected() {
        let mut cfg = SynthConfig::default();
        for t in &mut cfg.templates {
            t.count_range = [3, 6];
        }
        for r in generate(&cfg, 100, 9).unwrap() {
            assert!((3..=6).contains(&r.boxes.len()));
        }
    }

    #[test]
    fn disjoint_mixes_are_separable() {
        let cfg = SynthConfig::default();
        let mixes = template_mixes(&cfg).unwrap();
        for r in generate(&cfg, 100, 4).unwrap() {
            assert_eq!(frequency_oracle(&mixes, &r.boxes), r.landuse.unwrap());
        }
    }

    #[test]
    fn tamper_label_leaves_each_mix() {
        let mixes = template_mixes(&SynthConfig::default()).unwrap();
        for mix in &mixes {
            for c in 0..8 {
                if mix[c] > 0.0 {
                    assert_eq!(mix[tamper_label(c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn impossible_row() {
        let mut cfg = SynthConfig::default();
        cfg.templates[0].count_range = [20, 25];
        assert!(matches!(generate(&cfg, 1, 0), Err(Error::ImpossiblePlacement { .. })));
    }

    #[test]
    fn bad_templates() {
        let mut cfg = SynthConfig::default();
        cfg.templates[1].building_mix.insert("roof".into(), 0.5);
        assert!(generate(&cfg, 1, 0).is_err());
        let mut cfg = SynthConfig::default();
        cfg.templates.pop();
        assert!(generate(&cfg, 1, 0).is_err());
        let mut cfg = SynthConfig::default();
        cfg.templates[2].count_range = [2, 26];
        assert!(generate(&cfg, 1, 0).is_err());
    }

    #[test]
    fn identity_noise() {
        let data = generate(&SynthConfig::default(), 20, 3).unwrap();
        assert_eq!(perturb(&data, &NoiseModel::identity(), 5).unwrap(), data);
    }

    #[test]
    fn drop_everything() {
        let data = generate(&SynthConfig::default(), 20, 3).unwrap();
        let noise = NoiseModel { drop_rate: 1.0, ..NoiseModel::identity() };
        assert!(perturb(&data, &noise, 5).unwrap().iter().all(|r| r.boxes.is_empty()));
    }

    #[test]
    fn mislabel_rate_concentrates() {
        let boxes: Vec<BBox> = (0..100).map(|i| BBox::new(i % 8, 1.0, 0.1, 0.1, 0.2, 0.2)).collect();
        let recs: Vec<SceneRecord> = (0..100)
            .map(|i| SceneRecord {
                scene_id: format!("s{i}"),
                landuse: Some(0),
                width: 10,
                height: 10,
                lat: None,
                lon: None,
                boxes: boxes.clone(),
            })
            .collect();
        let noise = NoiseModel { mislabel_rate: 0.2, ..NoiseModel::identity() };
        let out = perturb(&recs, &noise, 17).unwrap();
        let flipped =
            out.iter().flat_map(|r| r.boxes.iter().zip(&boxes)).filter(|(a, b)| a.category != b.category).count();
        let frac = flipped as f64 / 10_000.0;
        assert!((frac - 0.2).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn jitter_stays_valid() {
        let data = generate(&SynthConfig::default(), 30, 3).unwrap();
        let noise = NoiseModel { jitter_scale: 0.3, ..NoiseModel::with_rates(0.2, 0.1) };
        for r in perturb(&data, &noise, 1).unwrap() {
            r.validate().unwrap();
        }
    }

    #[test]
    fn tamper_steps() {
        let boxes = vec![
            BBox::new(0, 0.56, 0.0, 0.0, 0.1, 0.1),
            BBox::new(5, 0.96, 0.2, 0.0, 0.1, 0.1),
            BBox::new(6, 0.89, 0.4, 0.0, 0.1, 0.1),
        ];
        let steps = tamper(&boxes, 3).unwrap();
        assert_eq!(steps.len(), 4);
        assert_eq!(steps[0], boxes);
        assert_eq!(steps[1][1].category, 6);
        assert_eq!(steps[1][0], boxes[0]);
        assert_eq!(steps[1][2], boxes[2]);
        for j in 0..3 {
            let diff = steps[j].iter().zip(&steps[j + 1]).filter(|(a, b)| a.category != b.category).count();
            assert_eq!(diff, 1);
        }
        assert!(matches!(tamper(&boxes, 4), Err(Error::TamperTooDeep { k: 4, count: 3 })));
    }
}
