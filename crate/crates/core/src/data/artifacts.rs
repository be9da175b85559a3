//! Run outputs: CSV tables, the knee summary, an SVG front plot and a PPM overlay.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a CSV back
//! reproduces the exact values and identical runs give identical bytes.

use std::io::{Read, Write};
use std::path::Path;

use crate::analysis::{InnovizationReport, KneeSelection, RobustnessPoint};
use crate::baselines::EpsilonResult;
use crate::error::{Error, Position, Result};
use crate::evolution::{ArchiveEntry, GenerationRecord};
use crate::features::{EdgePointSet, GrayImage};
use crate::kdtree::KdTree2;
use crate::objectives::ObjectiveVector;
use crate::problem::{CalibrationVector, NUM_VARIABLES, VARIABLE_NAMES};

pub const ARCHIVE_COLUMNS: [&str; 9] = ["x", "y", "z", "yaw", "pitch", "roll", "n", "chamfer", "comp_cost"];
pub const GENERATION_COLUMNS: [&str; 7] = [
    "generation",
    "evaluations",
    "best_chamfer",
    "mean_chamfer",
    "best_comp",
    "archive_size",
    "archive_hypervolume",
];

const ARCHIVE_KIND: &str = "archive CSV";

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::malformed(ARCHIVE_KIND, Position::Line(line), e.to_string())
}

fn write_table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("writing CSV: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing CSV: {e}")))
}

fn genome_cells(g: &CalibrationVector) -> impl Iterator<Item = String> + '_ {
    g.0.iter().map(|v| v.to_string())
}

fn header_with_genome<'a>(prefix: &[&'a str]) -> Vec<&'a str> {
    prefix.iter().copied().chain(VARIABLE_NAMES).collect()
}

pub fn write_archive_csv<W: Write>(out: W, entries: &[ArchiveEntry]) -> Result<()> {
    write_table(
        out,
        &ARCHIVE_COLUMNS,
        entries.iter().map(|e| {
            genome_cells(&e.genome)
                .chain([e.objectives.chamfer.to_string(), e.objectives.comp_cost.to_string()])
                .collect()
        }),
    )
}

/// Reads an archive CSV with the exact [`ARCHIVE_COLUMNS`] header. Positions in errors
/// are 1-based data rows.
pub fn read_archive_csv<R: Read>(input: R) -> Result<Vec<ArchiveEntry>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().map(str::trim).ne(ARCHIVE_COLUMNS) {
        return Err(Error::malformed(
            ARCHIVE_KIND,
            Position::Line(1),
            format!("header must be `{}`", ARCHIVE_COLUMNS.join(",")),
        ));
    }
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = Position::Row(i + 1);
        let rec = rec.map_err(|e| Error::malformed(ARCHIVE_KIND, row, e.to_string()))?;
        if rec.len() != ARCHIVE_COLUMNS.len() {
            return Err(Error::malformed(ARCHIVE_KIND, row, format!("expected 9 fields, found {}", rec.len())));
        }
        let mut v = [0.0; 9];
        for (slot, (field, name)) in v.iter_mut().zip(rec.iter().zip(ARCHIVE_COLUMNS)) {
            *slot = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::malformed(ARCHIVE_KIND, row, format!("{name} `{field}` is not a finite number")))?;
        }
        let objectives = ObjectiveVector::new(v[7], v[8]);
        if !objectives.is_valid() {
            return Err(Error::malformed(ARCHIVE_KIND, row, "objectives must be non-negative"));
        }
        entries.push(ArchiveEntry {
            genome: CalibrationVector(v[..NUM_VARIABLES].try_into().expect("seven genes")),
            objectives,
        });
    }
    Ok(entries)
}

pub fn parse_archive_csv(bytes: &[u8]) -> Result<Vec<ArchiveEntry>> {
    read_archive_csv(bytes)
}

pub fn load_archive_csv(path: impl AsRef<Path>) -> Result<Vec<ArchiveEntry>> {
    let path = path.as_ref();
    parse_archive_csv(&super::read_bytes(path)?).map_err(|e| e.in_file(path))
}

pub fn write_generations_csv<W: Write>(out: W, log: &[GenerationRecord]) -> Result<()> {
    write_table(
        out,
        &GENERATION_COLUMNS,
        log.iter().map(|g| {
            vec![
                g.generation.to_string(),
                g.evaluations.to_string(),
                g.best_chamfer.to_string(),
                g.mean_chamfer.to_string(),
                g.best_comp.to_string(),
                g.archive_size.to_string(),
                g.archive_hypervolume.to_string(),
            ]
        }),
    )
}

/// Columns: `epsilon, feasible, chamfer, comp_cost`, then the seven genes.
pub fn write_epsilon_csv<W: Write>(out: W, results: &[EpsilonResult]) -> Result<()> {
    write_table(
        out,
        &header_with_genome(&["epsilon", "feasible", "chamfer", "comp_cost"]),
        results.iter().map(|r| {
            [
                r.epsilon.to_string(),
                r.feasible.to_string(),
                r.achieved.chamfer.to_string(),
                r.achieved.comp_cost.to_string(),
            ]
            .into_iter()
            .chain(genome_cells(&r.solution))
            .collect()
        }),
    )
}

/// Columns: `w1, error`, then the seven genes.
pub fn write_robustness_csv<W: Write>(out: W, points: &[RobustnessPoint]) -> Result<()> {
    write_table(
        out,
        &header_with_genome(&["w1", "error"]),
        points.iter().map(|p| {
            [p.w1.to_string(), p.error.to_string()]
                .into_iter()
                .chain(genome_cells(&p.genome))
                .collect()
        }),
    )
}

/// Square matrix with a leading `variable` column naming each row.
pub fn write_correlations_csv<W: Write>(out: W, report: &InnovizationReport) -> Result<()> {
    let header: Vec<&str> = std::iter::once("variable")
        .chain(report.columns.iter().map(String::as_str))
        .collect();
    write_table(
        out,
        &header,
        report.columns.iter().zip(&report.matrix).map(|(name, row)| {
            std::iter::once(name.clone())
                .chain(row.iter().map(|v| v.to_string()))
                .collect()
        }),
    )
}

pub fn knee_summary(k: &KneeSelection) -> String {
    let mut s = String::new();
    for (name, v) in VARIABLE_NAMES.iter().zip(k.entry.genome.0) {
        s.push_str(&format!("{name} = {v}\n"));
    }
    s.push_str(&format!("chamfer = {}\n", k.entry.objectives.chamfer));
    s.push_str(&format!("comp_cost = {}\n", k.entry.objectives.comp_cost));
    s.push_str(&format!("knee_distance = {}\n", k.distance));
    s
}

/// Scatter plot of the front, chamfer on x and cost on y, with the knee ringed.
pub fn front_svg(entries: &[ArchiveEntry], knee: Option<&ArchiveEntry>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let span = |f: fn(&ArchiveEntry) -> f64| {
        let (lo, hi) = entries
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if entries.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (c0, c1) = span(|e| e.objectives.chamfer);
    let (k0, k1) = span(|e| e.objectives.comp_cost);
    let px = |c: f64| M + (c - c0) / (c1 - c0) * (W - 2.0 * M);
    let py = |k: f64| H - M - (k - k0) / (k1 - k0) * (H - 2.0 * M);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <path d=\"M{M} {M} V{b} H{r}\" stroke=\"black\" fill=\"none\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"14\">chamfer</text>\n\
         <text x=\"16\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 {cy})\">comp_cost</text>\n\
         <text x=\"{M}\" y=\"{lb}\" font-size=\"11\">{c0:.4}</text>\n\
         <text x=\"{r}\" y=\"{lb}\" font-size=\"11\" text-anchor=\"end\">{c1:.4}</text>\n\
         <text x=\"{lx}\" y=\"{b}\" font-size=\"11\" text-anchor=\"end\">{k0:.4}</text>\n\
         <text x=\"{lx}\" y=\"{M}\" font-size=\"11\" text-anchor=\"end\">{k1:.4}</text>\n",
        b = H - M,
        r = W - M,
        cx = W / 2.0,
        ty = H - 15.0,
        cy = H / 2.0,
        lb = H - M + 16.0,
        lx = M - 6.0,
    );
    for e in entries {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
            px(e.objectives.chamfer),
            py(e.objectives.comp_cost)
        ));
    }
    if let Some(k) = knee {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"8\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\"/>\n",
            px(k.objectives.chamfer),
            py(k.objectives.comp_cost)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Dimmed camera image with image edges in green, reference projections in blue and
/// candidate projections in red (drawn last).
pub fn render_overlay(
    image: &GrayImage,
    gt_edges: &EdgePointSet,
    candidate: &[[f64; 2]],
    reference: Option<&[[f64; 2]]>,
) -> Vec<[u8; 3]> {
    let mut rgb: Vec<[u8; 3]> = image.data.iter().map(|&v| [v / 2; 3]).collect();
    let mut paint = |p: &[f64; 2], c: [u8; 3]| {
        let (x, y) = (p[0].round(), p[1].round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < image.width && (y as usize) < image.height {
            rgb[y as usize * image.width + x as usize] = c;
        }
    };
    for p in &gt_edges.points {
        paint(p, [0, 200, 0]);
    }
    for p in reference.unwrap_or(&[]) {
        paint(p, [60, 120, 255]);
    }
    for p in candidate {
        paint(p, [255, 40, 40]);
    }
    rgb
}

/// Fraction of `points` within `radius` pixels of some edge pixel.
pub fn fraction_near_edges(points: &[[f64; 2]], edges: &EdgePointSet, radius: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let tree = KdTree2::new(&edges.points);
    let near = points
        .iter()
        .filter(|p| tree.nearest_sq_dist(p).is_some_and(|d| d <= radius * radius))
        .count();
    near as f64 / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries() -> Vec<ArchiveEntry> {
        vec![
            ArchiveEntry {
                genome: CalibrationVector([0.1, -0.2, 0.3, 0.01, 0.02, -0.03, 512.0]),
                objectives: ObjectiveVector::new(1.0 / 3.0, 0.9),
            },
            ArchiveEntry {
                genome: CalibrationVector([1e-17, 0.0, -1.5, 0.4363, -0.4363, 0.0, 100.0]),
                objectives: ObjectiveVector::new(2.5, 0.2),
            },
        ]
    }

    #[test]
    fn archive_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_archive_csv(&mut buf, &entries()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z,yaw,pitch,roll,n,chamfer,comp_cost\n"));
        assert_eq!(parse_archive_csv(&buf).unwrap(), entries());
    }

    #[test]
    fn archive_errors_are_positioned() {
        let bad = b"x,y,z,yaw,pitch,roll,n,chamfer,comp_cost\n0,0,0,0,0,0,100,1,1\n0,0,0,0,0,0,100,nan,1\n";
        match parse_archive_csv(bad).unwrap_err() {
            Error::Malformed { position, .. } => assert_eq!(position, Position::Row(2)),
            e => panic!("unexpected {e}"),
        }
        assert!(parse_archive_csv(b"a,b\n1,2\n").is_err());
        assert!(parse_archive_csv(b"x,y,z,yaw,pitch,roll,n,chamfer,comp_cost\n1,2,3\n").is_err());
        assert!(parse_archive_csv(b"x,y,z,yaw,pitch,roll,n,chamfer,comp_cost\n0,0,0,0,0,0,1,-1,1\n").is_err());
        assert!(parse_archive_csv(b"").is_err());
    }

    #[test]
    fn correlations_table_shape() {
        let report = InnovizationReport {
            columns: vec!["a".into(), "b".into()],
            matrix: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
            flagged: vec![],
        };
        let mut buf = Vec::new();
        write_correlations_csv(&mut buf, &report).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "variable,a,b\na,1,0.5\nb,0.5,1\n");
    }

    #[test]
    fn svg_marks_every_entry_and_the_knee() {
        let e = entries();
        let svg = front_svg(&e, Some(&e[0]));
        assert_eq!(svg.matches("fill=\"steelblue\"").count(), 2);
        assert_eq!(svg.matches("stroke=\"crimson\"").count(), 1);
        assert!(front_svg(&[], None).ends_with("</svg>\n"));
    }

    #[test]
    fn overlay_colours_and_edge_fraction() {
        let img = GrayImage::filled(4, 3, 100);
        let edges = EdgePointSet::new(vec![[1.0, 1.0]]);
        let rgb = render_overlay(&img, &edges, &[[3.2, 2.4], [-5.0, 0.0]], Some(&[[0.0, 0.0]]));
        assert_eq!(rgb[0], [60, 120, 255]);
        assert_eq!(rgb[4 + 1], [0, 200, 0]);
        assert_eq!(rgb[2 * 4 + 3], [255, 40, 40]);
        assert_eq!(rgb[1], [50, 50, 50]);
        let f = fraction_near_edges(&[[1.5, 1.5], [3.0, 1.0]], &edges, 1.0);
        assert_eq!(f, 0.5);
    }
}
