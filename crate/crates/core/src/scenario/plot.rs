use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::artifact::{read_trajectory_csv, SetRecord};
use super::ScenarioFile;
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, ConvexPolytope, Halfspace, Vec3};
use crate::planner::ReferencePath;

const FACE_TOL: f64 = 1e-9;
const PATH_SAMPLES: usize = 400;

/// Planar face given by its supporting row and vertices in boundary order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub row: usize,
    pub vertices: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceSet {
    pub name: String,
    pub faces: Vec<Face>,
}

/// Faces of a bounded polytope by vertex enumeration over row triples.
/// Rows that duplicate an earlier row or touch the body in fewer than three
/// vertices produce no face.
pub fn polytope_faces(poly: &ConvexPolytope) -> Vec<Face> {
    let rows = poly.rows();
    let mut verts: Vec<Vec3> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            for k in j + 1..rows.len() {
                let a = Matrix3::from_rows(&[
                    rows[i].normal.transpose(),
                    rows[j].normal.transpose(),
                    rows[k].normal.transpose(),
                ]);
                if a.determinant().abs() < 1e-10 {
                    continue;
                }
                let Some(inv) = a.try_inverse() else { continue };
                let v = inv * Vec3::new(rows[i].offset, rows[j].offset, rows[k].offset);
                if poly.max_violation(&v) <= FACE_TOL && !verts.iter().any(|w| (w - v).norm() <= FACE_TOL) {
                    verts.push(v);
                }
            }
        }
    }
    let mut faces = Vec::new();
    for (r, h) in rows.iter().enumerate() {
        let duplicate = rows[..r]
            .iter()
            .any(|g| (g.normal - h.normal).norm() <= 1e-12 && (g.offset - h.offset).abs() <= 1e-12);
        if duplicate {
            continue;
        }
        let on: Vec<Vec3> = verts
            .iter()
            .filter(|v| h.signed_distance(v).abs() <= FACE_TOL)
            .copied()
            .collect();
        if on.len() < 3 {
            continue;
        }
        let c = on.iter().sum::<Vec3>() / on.len() as f64;
        let u = (on[0] - c).normalize();
        let w = h.normal.cross(&u);
        let mut ordered: Vec<(f64, Vec3)> = on.iter().map(|v| ((v - c).dot(&w).atan2((v - c).dot(&u)), *v)).collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        faces.push(Face {
            row: r,
            vertices: ordered.into_iter().map(|(_, v)| v.into()).collect(),
        });
    }
    faces
}

/// Supporting half-spaces of a vertex hull, one per facet plane.
fn hull_polytope(body: &ConvexBody) -> ConvexPolytope {
    let v = body.vertices();
    let scale = v.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let mut rows: Vec<Halfspace> = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            for k in j + 1..v.len() {
                let Some(h) = Halfspace::new((v[j] - v[i]).cross(&(v[k] - v[i])), 0.0) else {
                    continue;
                };
                let offset = h.normal.dot(&v[i]);
                let d: Vec<f64> = v.iter().map(|p| h.normal.dot(p) - offset).collect();
                let tol = 1e-12 * scale;
                let sign = if d.iter().all(|x| *x <= tol) {
                    1.0
                } else if d.iter().all(|x| *x >= -tol) {
                    -1.0
                } else {
                    continue;
                };
                let h = Halfspace {
                    normal: sign * h.normal,
                    offset: sign * offset,
                };
                if !rows.iter().any(|g| (g.normal - h.normal).norm() <= 1e-9 && (g.offset - h.offset).abs() <= 1e-9) {
                    rows.push(h);
                }
            }
        }
    }
    ConvexPolytope::from_halfspaces(rows)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes polylines and face lists for the artifacts in `dir` into
/// `dir/plot`, returning the files written. Missing artifacts are skipped.
pub fn emit_plot_data(dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join("plot");
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();

    let scenario_file = dir.join("scenario.json");
    if scenario_file.exists() {
        let sc = ScenarioFile::load(&scenario_file)?;
        let obstacles: Vec<FaceSet> = sc
            .obstacles
            .iter()
            .map(|o| {
                let body = o.body().expect("validated obstacle");
                FaceSet {
                    name: o.name.clone(),
                    faces: polytope_faces(&hull_polytope(&body)),
                }
            })
            .collect();
        let f = out.join("obstacles.json");
        write_json(&f, &obstacles)?;
        written.push(f);
    }

    let path_file = dir.join("path.json");
    if path_file.exists() {
        let path: ReferencePath = read_json(&path_file)?;
        let mut phis: Vec<f64> = (0..=PATH_SAMPLES)
            .map(|k| path.length() * k as f64 / PATH_SAMPLES as f64)
            .chain(path.knots.iter().copied())
            .collect();
        phis.sort_by(f64::total_cmp);
        phis.dedup();
        let mut csv = String::from("phi,x,y,z\n");
        for phi in phis {
            let p = path.position(phi);
            let _ = writeln!(csv, "{phi},{},{},{}", p.x, p.y, p.z);
        }
        let f = out.join("reference.csv");
        fs::write(&f, csv)?;
        written.push(f);

        let mut csv = String::from("x,y,z\n");
        for p in &path.via_points {
            let _ = writeln!(csv, "{},{},{}", p.x, p.y, p.z);
        }
        let f = out.join("via_points.csv");
        fs::write(&f, csv)?;
        written.push(f);
    }

    let sets_file = dir.join("sets.json");
    if sets_file.exists() {
        let sets: Vec<SetRecord> = read_json(&sets_file)?;
        let faces: Vec<FaceSet> = sets
            .iter()
            .map(|s| {
                let rows = s
                    .a
                    .iter()
                    .zip(&s.b)
                    .map(|(a, b)| Halfspace {
                        normal: Vec3::from(*a),
                        offset: *b,
                    })
                    .collect();
                FaceSet {
                    name: format!("set {}", s.id),
                    faces: polytope_faces(&ConvexPolytope::from_halfspaces(rows)),
                }
            })
            .collect();
        let f = out.join("sets.json");
        write_json(&f, &faces)?;
        written.push(f);
    }

    let traj_file = dir.join("trajectory.csv");
    if traj_file.exists() {
        let steps = read_trajectory_csv(&fs::read_to_string(&traj_file)?)?;
        let mut csv = String::from("time,x,y,z\n");
        for s in &steps {
            let _ = writeln!(csv, "{},{},{},{}", s.time, s.position.x, s.position.y, s.position.z);
        }
        let f = out.join("trajectory.csv");
        fs::write(&f, csv)?;
        written.push(f);
    }
    Ok(written)
}
