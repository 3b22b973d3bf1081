//! Run configuration: a flat `key=value` text format, one entry per line.
//!
//! The format is deliberately minimal — no sections, no nesting — so config
//! files diff cleanly and can be generated from any language. Blank lines
//! and lines starting with `#` are ignored; whitespace around keys and
//! values is trimmed; every key may appear at most once.
//!
//! | key        | values                                   | default     |
//! |------------|------------------------------------------|-------------|
//! | `domain`   | `square` \| `lshape`                     | `square`    |
//! | `mesh`     | path to an ASCII mesh file               | —           |
//! | `potential`| catalog name (see `catalog` subcommand)  | required    |
//! | `gauge`    | `original` \| `canonical`                | `canonical` |
//! | `scalar`   | `none` \| `grid`                         | `none`      |
//! | `seed`     | u64 stream seed for the grid potential   | `0`         |
//! | `vstar`    | grid potential amplitude `V*`            | `100`       |
//! | `bc`       | `dirichlet` \| `neumann` (all markers)   | `dirichlet` |
//! | `bc.<m>`   | per-marker override, e.g. `bc.2=neumann` | —           |
//! | `p`        | polynomial degree 1–3                    | `3`         |
//! | `h`        | target mesh size for generated domains   | —           |
//! | `cells`    | square only: exact cells per side        | —           |
//! | `k`        | number of lowest eigenpairs, ≥ 1         | `6`         |
//! | `tol`      | eigensolver residual tolerance           | `1e-8`      |
//! | `quad`     | `auto` \| even quadrature exactness      | `auto`      |
//! | `samples`  | eigenvectors to sample onto a grid       | `k`         |
//! | `sample_n` | sample grid points per side, ≥ 2         | `101`       |
//! | `out`      | output run directory (must not exist)    | required    |
//!
//! `domain` and `mesh` are mutually exclusive; `h` (or `cells`) is required
//! for generated domains and ignored for mesh files.

use gaugefem::assemble::QuadChoice;
use gaugefem::mesh::{Bc, DomainKind};
use gaugefem::potentials::{vector_by_name, FieldKind};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::{CliError, Result};

/// Which vector potential the operator is assembled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeMode {
    /// Use the catalog potential `A` as given.
    Original,
    /// Replace `A` by its minimal-norm representative `F = A − ∇a_h`.
    Canonical,
}

impl fmt::Display for GaugeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaugeMode::Original => "original",
            GaugeMode::Canonical => "canonical",
        })
    }
}

/// The scalar potential `V` of the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarSpec {
    /// `V = 0`.
    None,
    /// Piecewise-constant random potential on a 16×16 grid over the domain
    /// bounding box, with amplitude `vstar` and SplitMix64 stream `seed`.
    Grid { seed: u64, vstar: f64 },
}

/// A fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Domain to mesh: a generator or a mesh file.
    pub domain: DomainKind,
    /// Boundary condition applied to every marker not overridden below.
    pub bc_default: Bc,
    /// Per-marker boundary condition overrides (mesh-file domains).
    pub bc_overrides: BTreeMap<i32, Bc>,
    /// Vector potential from the catalog.
    pub potential: FieldKind,
    /// The catalog name the potential was resolved from.
    pub potential_name: String,
    /// Original or canonical gauge.
    pub gauge: GaugeMode,
    /// Scalar potential specification.
    pub scalar: ScalarSpec,
    /// Polynomial degree of the FE space.
    pub p: usize,
    /// Target mesh size; `None` only for mesh-file domains or when `cells`
    /// pins the resolution directly.
    pub h: Option<f64>,
    /// Square domain only: exact number of cells per side, overriding `h`
    /// and the 16×16 alignment rounding.
    pub cells: Option<usize>,
    /// Number of lowest eigenpairs to compute.
    pub k: usize,
    /// Eigensolver residual tolerance.
    pub tol: f64,
    /// Quadrature exactness policy.
    pub quad: QuadChoice,
    /// How many of the `k` eigenvectors to sample; defaults to all.
    pub samples: usize,
    /// Sample grid resolution per side.
    pub sample_n: usize,
    /// Run directory to create.
    pub out: PathBuf,
}

impl RunConfig {
    /// The configuration re-serialized in a fixed key order, with defaults
    /// resolved. This is what the manifest echoes and what the config
    /// content hash is computed over, so two configs that resolve to the
    /// same run hash identically regardless of formatting.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        match &self.domain {
            DomainKind::Square => s.push_str("domain=square\n"),
            DomainKind::LShape => s.push_str("domain=lshape\n"),
            DomainKind::File(p) => s.push_str(&format!("mesh={}\n", p.display())),
        }
        s.push_str(&format!("potential={}\n", self.potential_name));
        s.push_str(&format!("gauge={}\n", self.gauge));
        match self.scalar {
            ScalarSpec::None => s.push_str("scalar=none\n"),
            ScalarSpec::Grid { seed, vstar } => {
                s.push_str("scalar=grid\n");
                s.push_str(&format!("seed={seed}\n"));
                s.push_str(&format!("vstar={vstar}\n"));
            }
        }
        s.push_str(&format!("bc={}\n", bc_name(self.bc_default)));
        for (m, bc) in &self.bc_overrides {
            s.push_str(&format!("bc.{m}={}\n", bc_name(*bc)));
        }
        s.push_str(&format!("p={}\n", self.p));
        if let Some(h) = self.h {
            s.push_str(&format!("h={h}\n"));
        }
        if let Some(c) = self.cells {
            s.push_str(&format!("cells={c}\n"));
        }
        s.push_str(&format!("k={}\n", self.k));
        s.push_str(&format!("tol={}\n", self.tol));
        match self.quad {
            QuadChoice::Auto => s.push_str("quad=auto\n"),
            QuadChoice::Degree(d) => s.push_str(&format!("quad={d}\n")),
        }
        s.push_str(&format!("samples={}\n", self.samples));
        s.push_str(&format!("sample_n={}\n", self.sample_n));
        s
    }
}

fn bc_name(bc: Bc) -> &'static str {
    match bc {
        Bc::Dirichlet => "dirichlet",
        Bc::Neumann => "neumann",
    }
}

fn parse_bc(value: &str) -> Result<Bc> {
    match value {
        "dirichlet" => Ok(Bc::Dirichlet),
        "neumann" => Ok(Bc::Neumann),
        other => Err(CliError::Config(format!(
            "boundary condition must be `dirichlet` or `neumann`, got `{other}`"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{value}`")))
}

/// Parse and validate a config file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key=value`, got `{line}`",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if map.insert(key, value).is_some() {
            return Err(CliError::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    let mut bc_overrides = BTreeMap::new();
    let override_keys: Vec<&str> =
        map.keys().copied().filter(|k| k.starts_with("bc.")).collect();
    for key in override_keys {
        let marker: i32 = parse_num(key, &key[3..])?;
        bc_overrides.insert(marker, parse_bc(map.remove(key).unwrap())?);
    }
    let mut take = |k: &str| map.remove(k);

    let domain = match (take("domain"), take("mesh")) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "`domain` and `mesh` are mutually exclusive".into(),
            ))
        }
        (None, Some(path)) => DomainKind::File(PathBuf::from(path)),
        (d, None) => match d.unwrap_or("square") {
            "square" => DomainKind::Square,
            "lshape" => DomainKind::LShape,
            other => {
                return Err(CliError::Config(format!(
                    "domain must be `square` or `lshape`, got `{other}`"
                )))
            }
        },
    };

    let potential_name = take("potential")
        .ok_or_else(|| CliError::Config("missing required key `potential`".into()))?
        .to_string();
    let potential = vector_by_name(&potential_name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown potential `{potential_name}`; see the `catalog` subcommand"
        ))
    })?;

    let gauge = match take("gauge").unwrap_or("canonical") {
        "original" => GaugeMode::Original,
        "canonical" => GaugeMode::Canonical,
        other => {
            return Err(CliError::Config(format!(
                "gauge must be `original` or `canonical`, got `{other}`"
            )))
        }
    };

    let scalar_kind = take("scalar").unwrap_or("none");
    let seed = take("seed");
    let vstar = take("vstar");
    let scalar = match scalar_kind {
        "none" => {
            if seed.is_some() || vstar.is_some() {
                return Err(CliError::Config(
                    "`seed`/`vstar` require `scalar=grid`".into(),
                ));
            }
            ScalarSpec::None
        }
        "grid" => ScalarSpec::Grid {
            seed: seed.map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0),
            vstar: vstar.map(|v| parse_num("vstar", v)).transpose()?.unwrap_or(100.0),
        },
        other => {
            return Err(CliError::Config(format!(
                "scalar must be `none` or `grid`, got `{other}`"
            )))
        }
    };
    if let ScalarSpec::Grid { vstar, .. } = scalar {
        if !vstar.is_finite() {
            return Err(CliError::Config("vstar must be finite".into()));
        }
    }

    let bc_default = take("bc").map(parse_bc).transpose()?.unwrap_or(Bc::Dirichlet);

    let p: usize = take("p").map(|v| parse_num("p", v)).transpose()?.unwrap_or(3);
    if !(1..=3).contains(&p) {
        return Err(CliError::Config(format!("p must be 1, 2, or 3, got {p}")));
    }

    let h: Option<f64> = take("h").map(|v| parse_num("h", v)).transpose()?;
    if let Some(h) = h {
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::Config(format!("h must be positive, got {h}")));
        }
    }
    let cells: Option<usize> = take("cells").map(|v| parse_num("cells", v)).transpose()?;
    if cells == Some(0) {
        return Err(CliError::Config("cells must be ≥ 1".into()));
    }
    if cells.is_some() && !matches!(domain, DomainKind::Square) {
        return Err(CliError::Config("`cells` applies to the square domain only".into()));
    }
    if matches!(domain, DomainKind::Square | DomainKind::LShape) && h.is_none() && cells.is_none()
    {
        return Err(CliError::Config(
            "generated domains need `h` (or `cells` for the square)".into(),
        ));
    }

    let k: usize = take("k").map(|v| parse_num("k", v)).transpose()?.unwrap_or(6);
    if k == 0 {
        return Err(CliError::Config("k must be ≥ 1".into()));
    }

    let tol: f64 = take("tol").map(|v| parse_num("tol", v)).transpose()?.unwrap_or(1e-8);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Config(format!("tol must be positive, got {tol}")));
    }

    let quad = match take("quad") {
        None => QuadChoice::Auto,
        Some("auto") => QuadChoice::Auto,
        Some(v) => QuadChoice::Degree(parse_num("quad", v)?),
    };

    let samples: usize =
        take("samples").map(|v| parse_num("samples", v)).transpose()?.unwrap_or(k);
    if samples > k {
        return Err(CliError::Config(format!(
            "samples = {samples} exceeds the number of computed pairs k = {k}"
        )));
    }
    let sample_n: usize =
        take("sample_n").map(|v| parse_num("sample_n", v)).transpose()?.unwrap_or(101);
    if samples > 0 && sample_n < 2 {
        return Err(CliError::Config("sample_n must be ≥ 2".into()));
    }

    let out = PathBuf::from(
        take("out").ok_or_else(|| CliError::Config("missing required key `out`".into()))?,
    );

    if let Some(key) = map.keys().next() {
        return Err(CliError::Config(format!("unknown key `{key}`")));
    }

    Ok(RunConfig {
        domain,
        bc_default,
        bc_overrides,
        potential,
        potential_name,
        gauge,
        scalar,
        p,
        h,
        cells,
        k,
        tol,
        quad,
        samples,
        sample_n,
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!("potential=ex1\nh=0.1\nout=/tmp/run\n{extra}")
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg = parse_config(&minimal("")).unwrap();
        assert!(matches!(cfg.domain, DomainKind::Square));
        assert_eq!(cfg.gauge, GaugeMode::Canonical);
        assert_eq!(cfg.scalar, ScalarSpec::None);
        assert_eq!(cfg.bc_default, Bc::Dirichlet);
        assert_eq!((cfg.p, cfg.k), (3, 6));
        assert_eq!(cfg.tol, 1e-8);
        assert_eq!(cfg.samples, 6);
        assert_eq!(cfg.sample_n, 101);
        assert!(matches!(cfg.quad, QuadChoice::Auto));
    }

    #[test]
    fn comments_blanks_and_whitespace_are_tolerated() {
        let text = "# a run\n\n  potential = a2 \nh=0.5\nout = runs/x\n gauge =original\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.potential_name, "a2");
        assert_eq!(cfg.gauge, GaugeMode::Original);
        assert_eq!(cfg.out, PathBuf::from("runs/x"));
    }

    #[test]
    fn constant_potentials_parse_with_components() {
        let cfg = parse_config(&minimal("potential=constant:7,-3").replace("potential=ex1\n", ""))
            .unwrap();
        assert_eq!(cfg.potential, FieldKind::Constant(7.0, -3.0));
    }

    #[test]
    fn rejections_name_the_offending_key() {
        let cases: &[(&str, &str)] = &[
            ("potential=ex1\nout=o\n", "need `h`"),
            ("h=0.1\nout=o\n", "`potential`"),
            ("potential=ex9\nh=0.1\nout=o\n", "unknown potential"),
            ("potential=ex1\nh=0.1\nout=o\nk=0\n", "k must be"),
            ("potential=ex1\nh=0.1\nout=o\np=4\n", "p must be"),
            ("potential=ex1\nh=0.1\nout=o\nbogus=1\n", "unknown key"),
            ("potential=ex1\nh=0.1\nout=o\nseed=3\n", "scalar=grid"),
            ("potential=ex1\nh=0.1\nout=o\nh=0.2\n", "duplicate"),
            ("potential=ex1\nh=0.1\nout=o\ndomain=lshape\ncells=32\n", "square"),
            ("potential=ex1\nh=0.1\nout=o\nsamples=9\n", "exceeds"),
            ("potential=ex1\nh=0.1\nout=o\ndomain=disc\n", "domain must be"),
            ("potential=ex1\nh=0.1\nout=o\nmesh=m.txt\ndomain=square\n", "mutually exclusive"),
        ];
        for (text, needle) in cases {
            let err = parse_config(text).unwrap_err().to_string();
            assert!(err.contains(needle), "`{text}` -> `{err}` missing `{needle}`");
        }
    }

    #[test]
    fn per_marker_overrides_parse() {
        let cfg =
            parse_config(&minimal("mesh=holes.txt\nbc=neumann\nbc.2=dirichlet\n").replace("h=0.1\n", ""))
                .unwrap();
        assert_eq!(cfg.bc_default, Bc::Neumann);
        assert_eq!(cfg.bc_overrides.get(&2), Some(&Bc::Dirichlet));
    }

    #[test]
    fn canonical_text_is_formatting_independent() {
        let a = parse_config("potential=ex1\nh=0.05\nout=a\n").unwrap();
        let b = parse_config("# run\nout = b\n  h =0.05\npotential= ex1\nk=6\n").unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
        assert!(a.canonical_text().contains("gauge=canonical"));
        assert!(!a.canonical_text().contains("out="));
    }

    #[test]
    fn grid_scalar_records_seed_and_amplitude() {
        let cfg = parse_config(&minimal("scalar=grid\nseed=11\nvstar=500\n")).unwrap();
        assert_eq!(cfg.scalar, ScalarSpec::Grid { seed: 11, vstar: 500.0 });
        let text = cfg.canonical_text();
        assert!(text.contains("seed=11\n") && text.contains("vstar=500\n"));
    }
}
