//! Plain-text trajectory files and flat exports.
//!
//! ```text
//! pvtraj 1
//! segments <n>
//! segment <k> nodes <m> geometry <plane|disk> tolerance <x> termination completed
//! intensities <xi_0> <xi_1> ...
//! events <n-1>
//! event <k> time <t> kind <burst|merge> groups <g> carried <b_0> <a_0> <b_1> <a_1> ...
//! group one <i> point <re> <im> many <j_0> <j_1> ...
//! data
//! <segment> <vortex> <t> <re> <im>
//! ```
//!
//! Numbers are written with 17 significant digits, so a write/read cycle is
//! exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::dynamics::{Event, EventGroup, EventKind, EventTrajectory, Geometry, Termination, Trajectory};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_string(traj: &EventTrajectory) -> String {
    let mut s = String::new();
    writeln!(s, "pvtraj {SCHEMA_VERSION}").unwrap();
    writeln!(s, "segments {}", traj.segments.len()).unwrap();
    for (k, seg) in traj.segments.iter().enumerate() {
        let term = match &seg.termination {
            Termination::Completed => "completed".to_string(),
            Termination::NearCollapse { time, pair, distance } => {
                format!("near_collapse {} {} {} {}", num(*time), pair.0, pair.1, num(*distance))
            }
        };
        writeln!(
            s,
            "segment {k} nodes {} geometry {} tolerance {} termination {term}",
            seg.len(),
            seg.geometry.name(),
            num(seg.tolerance)
        )
        .unwrap();
        let xs: Vec<String> = seg.intensities.iter().map(|x| num(*x)).collect();
        writeln!(s, "intensities {}", xs.join(" ")).unwrap();
    }
    writeln!(s, "events {}", traj.events.len()).unwrap();
    for (k, e) in traj.events.iter().enumerate() {
        let kind = match e.kind {
            EventKind::Burst => "burst",
            EventKind::Merge => "merge",
        };
        let carried: Vec<String> = e.carried.iter().map(|(b, a)| format!("{b} {a}")).collect();
        writeln!(
            s,
            "event {k} time {} kind {kind} groups {} carried {}",
            num(e.time),
            e.groups.len(),
            carried.join(" ")
        )
        .unwrap();
        for g in &e.groups {
            let many: Vec<String> = g.many.iter().map(|m| m.to_string()).collect();
            writeln!(s, "group one {} point {} {} many {}", g.one, num(g.point.re), num(g.point.im), many.join(" "))
                .unwrap();
        }
    }
    writeln!(s, "data").unwrap();
    for (k, seg) in traj.segments.iter().enumerate() {
        for (t, z) in seg.times.iter().zip(&seg.positions) {
            for (j, p) in z.iter().enumerate() {
                writeln!(s, "{k} {j} {} {} {}", num(*t), num(p.re), num(p.im)).unwrap();
            }
        }
    }
    s
}

pub fn write_file(traj: &EventTrajectory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_string(traj))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<EventTrajectory> {
    read_str(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.it.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Ok(l.split_whitespace().collect());
        }
        Err(Error::Parse("unexpected end of file".into()))
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("line {}: {msg}", self.line))
    }
}

fn parse<T: std::str::FromStr>(lines: &Lines, tok: Option<&&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err("missing field"))?;
    tok.parse().map_err(|_| lines.err(format!("cannot parse {tok:?}")))
}

fn expect(lines: &Lines, toks: &[&str], i: usize, word: &str) -> Result<()> {
    if toks.get(i) != Some(&word) {
        return Err(lines.err(format!("expected {word:?}")));
    }
    Ok(())
}

pub fn read_str(text: &str) -> Result<EventTrajectory> {
    let mut lines = Lines { it: text.lines().enumerate(), line: 0 };
    let head = lines.next()?;
    expect(&lines, &head, 0, "pvtraj")?;
    let version: u32 = parse(&lines, head.get(1))?;
    if version != SCHEMA_VERSION {
        return Err(lines.err(format!("unsupported schema version {version}")));
    }
    let t = lines.next()?;
    expect(&lines, &t, 0, "segments")?;
    let n_seg: usize = parse(&lines, t.get(1))?;
    if n_seg == 0 {
        return Err(lines.err("no segments"));
    }
    let mut segments = Vec::with_capacity(n_seg);
    let mut nodes = Vec::with_capacity(n_seg);
    for k in 0..n_seg {
        let t = lines.next()?;
        expect(&lines, &t, 0, "segment")?;
        if parse::<usize>(&lines, t.get(1))? != k {
            return Err(lines.err("segments out of order"));
        }
        expect(&lines, &t, 2, "nodes")?;
        nodes.push(parse::<usize>(&lines, t.get(3))?);
        expect(&lines, &t, 4, "geometry")?;
        let geometry = match t.get(5) {
            Some(&"plane") => Geometry::Plane,
            Some(&"disk") => Geometry::Disk,
            _ => return Err(lines.err("unknown geometry")),
        };
        expect(&lines, &t, 6, "tolerance")?;
        let tolerance = parse(&lines, t.get(7))?;
        expect(&lines, &t, 8, "termination")?;
        let termination = match t.get(9) {
            Some(&"completed") => Termination::Completed,
            Some(&"near_collapse") => Termination::NearCollapse {
                time: parse(&lines, t.get(10))?,
                pair: (parse(&lines, t.get(11))?, parse(&lines, t.get(12))?),
                distance: parse(&lines, t.get(13))?,
            },
            _ => return Err(lines.err("unknown termination")),
        };
        let t = lines.next()?;
        expect(&lines, &t, 0, "intensities")?;
        let intensities = t[1..].iter().map(|x| parse(&lines, Some(x))).collect::<Result<Vec<f64>>>()?;
        segments.push(Trajectory {
            intensities,
            times: vec![],
            positions: vec![],
            geometry,
            tolerance,
            termination,
        });
    }
    let t = lines.next()?;
    expect(&lines, &t, 0, "events")?;
    let n_ev: usize = parse(&lines, t.get(1))?;
    let mut events = Vec::with_capacity(n_ev);
    for k in 0..n_ev {
        let t = lines.next()?;
        expect(&lines, &t, 0, "event")?;
        if parse::<usize>(&lines, t.get(1))? != k {
            return Err(lines.err("events out of order"));
        }
        expect(&lines, &t, 2, "time")?;
        let time = parse(&lines, t.get(3))?;
        expect(&lines, &t, 4, "kind")?;
        let kind = match t.get(5) {
            Some(&"burst") => EventKind::Burst,
            Some(&"merge") => EventKind::Merge,
            _ => return Err(lines.err("unknown event kind")),
        };
        expect(&lines, &t, 6, "groups")?;
        let n_groups: usize = parse(&lines, t.get(7))?;
        expect(&lines, &t, 8, "carried")?;
        let idx = t[9..].iter().map(|x| parse(&lines, Some(x))).collect::<Result<Vec<usize>>>()?;
        if idx.len() % 2 != 0 {
            return Err(lines.err("carried indices must come in pairs"));
        }
        let carried = idx.chunks(2).map(|c| (c[0], c[1])).collect();
        let mut groups = vec![];
        for _ in 0..n_groups {
            let g = lines.next()?;
            expect(&lines, &g, 0, "group")?;
            expect(&lines, &g, 1, "one")?;
            let one = parse(&lines, g.get(2))?;
            expect(&lines, &g, 3, "point")?;
            let point = Complex64::new(parse(&lines, g.get(4))?, parse(&lines, g.get(5))?);
            expect(&lines, &g, 6, "many")?;
            let many = g[7..].iter().map(|x| parse(&lines, Some(x))).collect::<Result<Vec<usize>>>()?;
            groups.push(EventGroup { one, many, point });
        }
        events.push(Event { time, kind, groups, carried });
    }
    if events.len() + 1 != segments.len() {
        return Err(lines.err("need one event between consecutive segments"));
    }
    let t = lines.next()?;
    expect(&lines, &t, 0, "data")?;
    for (k, seg) in segments.iter_mut().enumerate() {
        let n = seg.intensities.len();
        for i in 0..nodes[k] {
            let mut z = Vec::with_capacity(n);
            let mut time = f64::NAN;
            for j in 0..n {
                let r = lines.next()?;
                if r.len() != 5 || parse::<usize>(&lines, r.first())? != k || parse::<usize>(&lines, r.get(1))? != j {
                    return Err(lines.err(format!("expected record for segment {k} vortex {j}")));
                }
                let tj: f64 = parse(&lines, r.get(2))?;
                if j == 0 {
                    time = tj;
                } else if tj != time {
                    return Err(lines.err("vortices of one node disagree on t"));
                }
                z.push(Complex64::new(parse(&lines, r.get(3))?, parse(&lines, r.get(4))?));
            }
            if n == 0 {
                return Err(lines.err("segment without vortices"));
            }
            if i > 0 && !(time > *seg.times.last().unwrap()) {
                return Err(lines.err("times must increase within a segment"));
            }
            seg.times.push(time);
            seg.positions.push(z);
        }
        if seg.times.is_empty() {
            return Err(lines.err(format!("segment {k} has no nodes")));
        }
    }
    if lines.next().is_ok() {
        return Err(lines.err("trailing data"));
    }
    Ok(EventTrajectory { segments, events })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// One row per node and vortex with intensity and segment columns.
    Table,
    /// One block per segment and vortex, blocks separated by two blank lines.
    PlotData,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "plotdata" => Ok(Self::PlotData),
            _ => Err(Error::Parse(format!("unknown export format {s:?} (table|plotdata)"))),
        }
    }
}

pub fn export(traj: &EventTrajectory, format: ExportFormat) -> String {
    let mut s = String::new();
    match format {
        ExportFormat::Table => {
            writeln!(s, "segment\tnode\tvortex\tintensity\tt\tx\ty").unwrap();
            for (k, seg) in traj.segments.iter().enumerate() {
                for (i, (t, z)) in seg.times.iter().zip(&seg.positions).enumerate() {
                    for (j, p) in z.iter().enumerate() {
                        writeln!(
                            s,
                            "{k}\t{i}\t{j}\t{}\t{}\t{}\t{}",
                            num(seg.intensities[j]),
                            num(*t),
                            num(p.re),
                            num(p.im)
                        )
                        .unwrap();
                    }
                }
            }
        }
        ExportFormat::PlotData => {
            for (k, seg) in traj.segments.iter().enumerate() {
                for j in 0..seg.vortex_count() {
                    writeln!(s, "# segment {k} vortex {j} intensity {}", num(seg.intensities[j])).unwrap();
                    for (t, z) in seg.times.iter().zip(&seg.positions) {
                        writeln!(s, "{} {} {}", num(*t), num(z[j].re), num(z[j].im)).unwrap();
                    }
                    s.push_str("\n\n");
                }
            }
            for e in &traj.events {
                for g in &e.groups {
                    writeln!(s, "# event {:?} at t = {}", e.kind, num(e.time)).unwrap();
                    writeln!(s, "{} {} {}", num(e.time), num(g.point.re), num(g.point.im)).unwrap();
                    s.push_str("\n\n");
                }
            }
        }
    }
    s
}

/// Reads back a table export. Event bookkeeping is not part of the table, so
/// only the segments come back.
pub fn import_table(text: &str) -> Result<Vec<Trajectory>> {
    let mut segs: Vec<Trajectory> = vec![];
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("table line {}", ln + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(bad());
        }
        let k: usize = f[0].parse().map_err(|_| bad())?;
        let i: usize = f[1].parse().map_err(|_| bad())?;
        let j: usize = f[2].parse().map_err(|_| bad())?;
        let v: Vec<f64> = f[3..].iter().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        if k == segs.len() {
            segs.push(Trajectory {
                intensities: vec![],
                times: vec![],
                positions: vec![],
                geometry: Geometry::Plane,
                tolerance: 0.0,
                termination: Termination::Completed,
            });
        }
        let seg = segs.get_mut(k).ok_or_else(bad)?;
        if i == seg.times.len() {
            seg.times.push(v[1]);
            seg.positions.push(vec![]);
        }
        if i + 1 != seg.times.len() || j != seg.positions[i].len() {
            return Err(bad());
        }
        if i == 0 {
            seg.intensities.push(v[0]);
        }
        seg.positions[i].push(Complex64::new(v[2], v[3]));
    }
    Ok(segs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EventTrajectory {
        let seg = |xs: Vec<f64>, t0: f64| Trajectory {
            times: vec![t0, t0 + 0.1],
            positions: vec![
                xs.iter().enumerate().map(|(j, _)| Complex64::new(j as f64 / 3.0, -0.1)).collect(),
                xs.iter().enumerate().map(|(j, _)| Complex64::new(1e-300 * j as f64, std::f64::consts::PI)).collect(),
            ],
            intensities: xs,
            geometry: Geometry::Plane,
            tolerance: 1e-10,
            termination: Termination::Completed,
        };
        let mut et = EventTrajectory::from_segment(seg(vec![1.0, 0.3], 0.0));
        et.push(
            Event {
                time: 0.15,
                kind: EventKind::Burst,
                groups: vec![EventGroup { one: 0, many: vec![0, 1, 2], point: Complex64::new(0.1, 0.2) }],
                carried: vec![(1, 3)],
            },
            seg(vec![-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.3], 0.15),
        );
        et
    }

    #[test]
    fn round_trip_is_exact() {
        let et = sample();
        assert_eq!(read_str(&write_string(&et)).unwrap(), et);
    }

    #[test]
    fn table_round_trip() {
        let et = sample();
        let segs = import_table(&export(&et, ExportFormat::Table)).unwrap();
        for (a, b) in segs.iter().zip(&et.segments) {
            assert_eq!(a.times, b.times);
            assert_eq!(a.positions, b.positions);
            assert_eq!(a.intensities, b.intensities);
        }
    }

    #[test]
    fn rejects_truncated_file() {
        let s = write_string(&sample());
        let cut = &s[..s.len() - 40];
        assert!(read_str(cut).is_err());
    }
}
