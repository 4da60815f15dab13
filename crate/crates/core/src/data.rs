//! Multi-domain labelled datasets: synthetic generation and CSV exchange.
//!
//! The CSV layout is `domain,label,f0,...,f{d-1}` with a mandatory header.
//! Values are written with the shortest representation that parses back to
//! the identical `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::ecf::FeatureMatrix;
use crate::error::{Error, Result};

/// How a domain takes part in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainRole {
    /// Labelled; used by both the supervised and the alignment term.
    Source,
    /// Unlabelled during training; used by the alignment term only.
    Target,
    /// Never seen during training.
    Unseen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub role: DomainRole,
}

impl Domain {
    pub fn id(&self) -> &str {
        self.features.domain_id()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labelled feature vectors grouped by domain, in a fixed domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    classes: usize,
    domains: Vec<Domain>,
}

impl LabeledDataset {
    pub fn new(dim: usize, classes: usize, domains: Vec<Domain>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be positive"));
        }
        for (i, d) in domains.iter().enumerate() {
            if d.features.ncols() != dim {
                return Err(Error::invalid(format!(
                    "domain {} has dimension {}, expected {dim}",
                    d.id(),
                    d.features.ncols()
                )));
            }
            if d.features.nrows() != d.labels.len() {
                return Err(Error::invalid(format!(
                    "domain {} has {} rows but {} labels",
                    d.id(),
                    d.features.nrows(),
                    d.labels.len()
                )));
            }
            if let Some(&bad) = d.labels.iter().find(|&&l| l >= classes) {
                return Err(Error::invalid(format!(
                    "label {bad} in domain {} is out of range for {classes} classes",
                    d.id()
                )));
            }
            if domains[..i].iter().any(|o| o.id() == d.id()) {
                return Err(Error::invalid(format!("duplicate domain id {}", d.id())));
            }
        }
        Ok(Self {
            dim,
            classes,
            domains,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, id: &str) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id() == id)
    }

    pub fn domain_ids(&self) -> Vec<&str> {
        self.domains.iter().map(Domain::id).collect()
    }

    pub fn len(&self) -> usize {
        self.domains.iter().map(Domain::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_domain_ids(&self, ids: &[&str]) -> Result<LabeledDataset> {
        let domains = ids
            .iter()
            .map(|id| {
                self.domain(id)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("unknown domain {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(self.dim, self.classes, domains)
    }

    /// Assigns roles: listed sources and targets, everything else unseen.
    pub fn with_split(mut self, source: &[&str], target: &[&str]) -> Result<Self> {
        for id in source.iter().chain(target) {
            if self.domain(id).is_none() {
                return Err(Error::invalid(format!("unknown domain {id}")));
            }
        }
        if let Some(both) = source.iter().find(|s| target.contains(s)) {
            return Err(Error::invalid(format!(
                "domain {both} is both source and target"
            )));
        }
        for d in &mut self.domains {
            d.role = if source.contains(&d.id()) {
                DomainRole::Source
            } else if target.contains(&d.id()) {
                DomainRole::Target
            } else {
                DomainRole::Unseen
            };
        }
        Ok(self)
    }

    pub fn by_role(&self, role: DomainRole) -> impl Iterator<Item = &Domain> {
        self.domains.iter().filter(move |d| d.role == role)
    }

    pub fn features(&self) -> Vec<FeatureMatrix> {
        self.domains.iter().map(|d| d.features.clone()).collect()
    }
}

/// Rotation (in the plane of the first two coordinates) followed by a
/// translation, applied to every sample of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTransform {
    pub rotation_deg: f64,
    pub translation: Vec<f64>,
}

impl DomainTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            rotation_deg: 0.0,
            translation: vec![0.0; dim],
        }
    }

    fn apply(&self, x: &mut [f64]) {
        if x.len() >= 2 && self.rotation_deg != 0.0 {
            let (s, c) = self.rotation_deg.to_radians().sin_cos();
            let (a, b) = (x[0], x[1]);
            x[0] = c * a - s * b;
            x[1] = s * a + c * b;
        }
        for (v, t) in x.iter_mut().zip(&self.translation) {
            *v += t;
        }
    }
}

/// Distance of every class centre from the origin.
pub const CLASS_RADIUS: f64 = 3.0;

/// Recipe for a synthetic multi-domain classification set.
///
/// Class `c` is an isotropic Gaussian around vertex `c` of a regular simplex
/// spanning the first `classes` coordinates; domain `t` then applies
/// `transforms[t]`. Domains are named `D0`, `D1`, ...
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_domains: usize,
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class_per_domain: usize,
    pub transforms: Vec<DomainTransform>,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Domain `t` rotated by `t * rotation_step` degrees and shifted by
    /// `t * shift_step` along a fixed unit direction spread evenly over the
    /// coordinates that carry no class signal.
    pub fn graded(
        n_domains: usize,
        classes: usize,
        dim: usize,
        samples_per_class_per_domain: usize,
        rotation_step: f64,
        shift_step: f64,
        seed: u64,
    ) -> Self {
        let style = style_direction(dim, classes);
        let transforms = (0..n_domains)
            .map(|t| DomainTransform {
                rotation_deg: t as f64 * rotation_step,
                translation: style.iter().map(|u| u * shift_step * t as f64).collect(),
            })
            .collect();
        Self {
            n_domains,
            classes,
            dim,
            samples_per_class_per_domain,
            transforms,
            noise_std: 1.0,
            seed,
        }
    }

    /// Three domains, three classes, 16 features, 200 samples per class and
    /// domain. `D0` and `D2` are the extremes of the shift and serve as
    /// source and target; `D1` lies between them and is held out.
    pub fn benchmark(seed: u64) -> Self {
        Self::graded(
            3,
            3,
            16,
            200,
            BENCHMARK_ROTATION_STEP,
            BENCHMARK_SHIFT_STEP,
            seed,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.n_domains == 0 || self.classes == 0 || self.dim == 0 {
            return Err(Error::invalid(
                "domains, classes and dimension must be positive",
            ));
        }
        if self.samples_per_class_per_domain == 0 {
            return Err(Error::invalid(
                "samples per class per domain must be positive",
            ));
        }
        if self.classes > self.dim {
            return Err(Error::invalid(format!(
                "{} classes do not fit a simplex in {} dimensions",
                self.classes, self.dim
            )));
        }
        if self.transforms.len() != self.n_domains {
            return Err(Error::invalid("need exactly one transform per domain"));
        }
        if self
            .transforms
            .iter()
            .any(|t| t.translation.len() != self.dim)
        {
            return Err(Error::invalid(
                "translation length must equal the dimension",
            ));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise std must be positive"));
        }
        Ok(())
    }
}

pub const BENCHMARK_ROTATION_STEP: f64 = 15.0;
pub const BENCHMARK_SHIFT_STEP: f64 = 2.5;
pub const BENCHMARK_SOURCE: &str = "D0";
pub const BENCHMARK_TARGET: &str = "D2";
pub const BENCHMARK_UNSEEN: &str = "D1";

fn style_direction(dim: usize, classes: usize) -> Vec<f64> {
    let start = if classes < dim { classes } else { 0 };
    let w = 1.0 / ((dim - start) as f64).sqrt();
    (0..dim).map(|j| if j >= start { w } else { 0.0 }).collect()
}

fn simplex_centers(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    if classes == 1 {
        return vec![vec![0.0; dim]];
    }
    let c = classes as f64;
    let norm = (c / (c - 1.0)).sqrt();
    (0..classes)
        .map(|k| {
            (0..dim)
                .map(|j| {
                    if j >= classes {
                        0.0
                    } else {
                        let e = if j == k { 1.0 } else { 0.0 };
                        CLASS_RADIUS * norm * (e - 1.0 / c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Draws a dataset from `spec`. All randomness comes from one
/// `ChaCha20Rng` stream seeded with `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let centers = simplex_centers(spec.classes, spec.dim);
    let per_domain = spec.classes * spec.samples_per_class_per_domain;
    let mut domains = Vec::with_capacity(spec.n_domains);
    for (t, transform) in spec.transforms.iter().enumerate() {
        let mut values = Vec::with_capacity(per_domain * spec.dim);
        let mut labels = Vec::with_capacity(per_domain);
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..spec.samples_per_class_per_domain {
                let mut x: Vec<f64> = center
                    .iter()
                    .map(|m| m + spec.noise_std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                transform.apply(&mut x);
                values.extend_from_slice(&x);
                labels.push(c);
            }
        }
        let values = Array2::from_shape_vec((per_domain, spec.dim), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        domains.push(Domain {
            features: FeatureMatrix::new(values, format!("D{t}"))?,
            labels,
            role: DomainRole::Source,
        });
    }
    LabeledDataset::new(spec.dim, spec.classes, domains)
}

/// Supported embedding file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Csv,
}

/// Reads an embedding file. Every domain starts with the `Source` role and
/// the class count is one more than the largest label.
pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<LabeledDataset> {
    match format {
        EmbeddingFormat::Csv => read_csv(File::open(path)?),
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let dim = check_header(&header)?;
    let mut groups: Vec<(String, Vec<f64>, Vec<usize>)> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |message: String| Error::Parse { line, message };
        if rec.len() != dim + 2 {
            return Err(perr(format!(
                "expected {} columns, found {}",
                dim + 2,
                rec.len()
            )));
        }
        let domain = &rec[0];
        if domain.is_empty() {
            return Err(perr("empty domain tag".into()));
        }
        let label: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| perr(format!("invalid label {:?}", &rec[1])))?;
        let idx = match groups.iter().position(|g| g.0 == domain) {
            Some(i) => i,
            None => {
                groups.push((domain.to_string(), Vec::new(), Vec::new()));
                groups.len() - 1
            }
        };
        let group = &mut groups[idx];
        for (j, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| perr(format!("invalid value {field:?} in column f{j}")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite value in column f{j}")));
            }
            group.1.push(v);
        }
        group.2.push(label);
    }
    let classes = groups
        .iter()
        .flat_map(|g| g.2.iter())
        .max()
        .map_or(0, |m| m + 1);
    let domains = groups
        .into_iter()
        .map(|(id, values, labels)| {
            let values = Array2::from_shape_vec((labels.len(), dim), values)
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(Domain {
                features: FeatureMatrix::new(values, id)?,
                labels,
                role: DomainRole::Source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(dim, classes, domains)
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |message: String| Error::Parse { line: 1, message };
    if header.len() < 2 || &header[0] != "domain" || &header[1] != "label" {
        return Err(bad("header must start with domain,label".into()));
    }
    let dim = header.len() - 2;
    if dim == 0 {
        return Err(bad("header declares no feature columns".into()));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(bad(format!("expected column f{j}, found {name:?}")));
        }
    }
    Ok(dim)
}

/// Writes `dataset` as CSV: domains in dataset order, rows in insertion order.
pub fn save_embeddings(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    write_csv(dataset, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(dataset: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["domain".to_string(), "label".to_string()];
    header.extend((0..dataset.dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(dataset.dim() + 2);
    for d in dataset.domains() {
        for (row, label) in d.features.values().rows().into_iter().zip(&d.labels) {
            record.clear();
            record.push(d.id().to_string());
            record.push(label.to_string());
            record.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec::graded(2, 3, 4, 5, 30.0, 1.0, seed)
    }

    #[test]
    fn generate_is_deterministic_and_balanced() {
        let a = generate(&small_spec(7)).unwrap();
        let b = generate(&small_spec(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&small_spec(8)).unwrap());
        assert_eq!(a.domain_ids(), vec!["D0", "D1"]);
        for d in a.domains() {
            for c in 0..3 {
                assert_eq!(d.labels.iter().filter(|&&l| l == c).count(), 5);
            }
        }
    }

    #[test]
    fn simplex_centers_are_equidistant() {
        let cs = simplex_centers(4, 6);
        for c in &cs {
            let r: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - CLASS_RADIUS).abs() < 1e-12);
        }
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let d01 = dist(&cs[0], &cs[1]);
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((dist(&cs[i], &cs[j]) - d01).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_acts_on_first_two_coordinates() {
        let t = DomainTransform {
            rotation_deg: 90.0,
            translation: vec![0.0, 0.0, 1.0],
        };
        let mut x = vec![1.0, 0.0, 5.0];
        t.apply(&mut x);
        assert!(x[0].abs() < 1e-15);
        assert!((x[1] - 1.0).abs() < 1e-15);
        assert_eq!(x[2], 6.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = small_spec(0);
        s.classes = 5;
        assert!(generate(&s).is_err());
        let mut s = small_spec(0);
        s.samples_per_class_per_domain = 0;
        assert!(generate(&s).is_err());
        let mut s = small_spec(0);
        s.transforms.pop();
        assert!(generate(&s).is_err());
        let mut s = small_spec(0);
        s.noise_std = 0.0;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn parse_small_file() {
        let text = "domain,label,f0,f1,f2,f3\nA,0,1,2,3,4\nB,1,0.5,-1,2e-3,0\nA,1,0,0,0,0\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.classes(), 2);
        assert_eq!(ds.domain_ids(), vec!["A", "B"]);
        assert_eq!(ds.domain("A").unwrap().labels, vec![0, 1]);
        assert_eq!(ds.domain("B").unwrap().features.row(0)[2], 2e-3);
    }

    #[test]
    fn bad_label_reports_its_line() {
        let mut text = String::from("domain,label,f0\n");
        for _ in 0..5 {
            text.push_str("A,0,1.0\n");
        }
        text.push_str("A,x,1.0\n");
        match read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_and_bad_headers() {
        assert!(matches!(
            read_csv("domain,label,f0,f1\nA,0,1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_csv("domain,label\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_csv("dom,label,f0\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_csv("".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_csv("domain,label,f0\nA,0,nan\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let ds = LabeledDataset::new(3, 2, vec![]).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "domain,label,f0,f1,f2\n");
    }

    #[test]
    fn single_sample_writes_two_lines() {
        let fm = FeatureMatrix::from_rows(&[vec![0.1, -2.5]], "only").unwrap();
        let ds = LabeledDataset::new(
            2,
            1,
            vec![Domain {
                features: fm,
                labels: vec![0],
                role: DomainRole::Source,
            }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "domain,label,f0,f1\nonly,0,0.1,-2.5\n"
        );
    }

    #[test]
    fn split_assigns_roles() {
        let ds = generate(&SyntheticSpec::graded(3, 2, 3, 2, 0.0, 0.0, 1)).unwrap();
        let ds = ds.with_split(&["D0"], &["D2"]).unwrap();
        let roles: Vec<_> = ds.domains().iter().map(|d| d.role).collect();
        assert_eq!(
            roles,
            vec![DomainRole::Source, DomainRole::Unseen, DomainRole::Target]
        );
        assert!(ds.clone().with_split(&["nope"], &[]).is_err());
        assert!(ds.with_split(&["D0"], &["D0"]).is_err());
    }
}
