use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    Xyz,
    Off,
    PlyAscii,
}

impl CloudFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "off" => Ok(CloudFormat::Off),
            "ply" => Ok(CloudFormat::PlyAscii),
            _ => Err(Error::invalid(format!(
                "cannot infer point cloud format of `{}`",
                path.display()
            ))),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "xyz" => Ok(CloudFormat::Xyz),
            "off" => Ok(CloudFormat::Off),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::invalid(format!("unknown cloud format `{other}`"))),
        }
    }
}

pub fn read_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, format)
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::invalid("empty output path"));
    }
    std::fs::write(path, format_cloud(cloud, format)).map_err(|e| Error::io(path, e))
}

pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<PointCloud> {
    let points = match format {
        CloudFormat::Xyz => parse_xyz(text)?,
        CloudFormat::Off => parse_off(text)?,
        CloudFormat::PlyAscii => parse_ply(text)?,
    };
    if points.is_empty() {
        return Err(Error::InvalidData("file contains no points".into()));
    }
    PointCloud::new(points)
}

/// Coordinates use the shortest decimal form that parses back to the same
/// double.
pub fn format_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut out = String::with_capacity(cloud.len() * 64);
    match format {
        CloudFormat::Xyz => {}
        CloudFormat::Off => {
            let _ = writeln!(out, "OFF\n{} 0 0", cloud.len());
        }
        CloudFormat::PlyAscii => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
                cloud.len()
            );
        }
    }
    for p in cloud.points() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    out
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        detail: format!("`{tok}` is not a number"),
    })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        detail: format!("`{tok}` is not a count"),
    })
}

fn point_from(tokens: &[&str], line: usize) -> Result<Point3<f64>> {
    Ok(Point3::new(
        parse_f64(tokens[0], line)?,
        parse_f64(tokens[1], line)?,
        parse_f64(tokens[2], line)?,
    ))
}

fn parse_xyz(text: &str) -> Result<Vec<Point3<f64>>> {
    content_lines(text)
        .map(|(n, l)| {
            let tokens: Vec<&str> = l.split_whitespace().collect();
            if tokens.len() != 3 {
                return Err(Error::Parse {
                    line: n,
                    detail: format!("expected 3 coordinates, found {}", tokens.len()),
                });
            }
            point_from(&tokens, n)
        })
        .collect()
}

fn parse_off(text: &str) -> Result<Vec<Point3<f64>>> {
    let mut lines = content_lines(text);
    let Some((n, first)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            detail: "missing OFF header".into(),
        });
    };
    let Some(rest) = first.strip_prefix("OFF") else {
        return Err(Error::Parse {
            line: n,
            detail: "header must start with OFF".into(),
        });
    };
    // some corpora glue the counts onto the keyword: "OFF490 518 0"
    let (count_line, counts) = if rest.trim().is_empty() {
        let (m, l) = lines.next().ok_or_else(|| Error::Parse {
            line: n + 1,
            detail: "missing vertex/face counts".into(),
        })?;
        (m, l.to_string())
    } else {
        (n, rest.trim().to_string())
    };
    let counts: Vec<&str> = counts.split_whitespace().collect();
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: count_line,
            detail: "expected vertex and face counts".into(),
        });
    }
    let nv = parse_usize(counts[0], count_line)?;
    if nv == 0 {
        return Err(Error::InvalidData("OFF file declares 0 vertices".into()));
    }
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (m, l) = lines.next().ok_or_else(|| Error::Parse {
            line: count_line,
            detail: format!("file ends after {} of {nv} vertices", points.len()),
        })?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(Error::Parse {
                line: m,
                detail: "vertex needs 3 coordinates".into(),
            });
        }
        points.push(point_from(&tokens, m)?);
    }
    Ok(points)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_ply(text: &str) -> Result<Vec<Point3<f64>>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                detail: "missing `ply` magic".into(),
            })
        }
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_end = None;
    for (n, l) in lines.by_ref() {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(Error::Parse {
                    line: n,
                    detail: format!("unsupported PLY format `{other}`; only ascii is read"),
                })
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: parse_usize(count, n)?,
                properties: Vec::new(),
            }),
            ["property", .., name] => match elements.last_mut() {
                Some(e) => e.properties.push(name.to_string()),
                None => {
                    return Err(Error::Parse {
                        line: n,
                        detail: "property before any element".into(),
                    })
                }
            },
            ["end_header"] => {
                header_end = Some(n);
                break;
            }
            _ => {
                return Err(Error::Parse {
                    line: n,
                    detail: format!("unrecognized header line `{l}`"),
                })
            }
        }
    }
    let header_end = header_end.ok_or_else(|| Error::Parse {
        line: text.lines().count(),
        detail: "missing end_header".into(),
    })?;
    let Some(vi) = elements.iter().position(|e| e.name == "vertex") else {
        return Err(Error::Parse {
            line: header_end,
            detail: "no vertex element".into(),
        });
    };
    let vertex = &elements[vi];
    let col = |axis: &str| {
        vertex.properties.iter().position(|p| p == axis).ok_or_else(|| Error::Parse {
            line: header_end,
            detail: format!("vertex element lacks property `{axis}`"),
        })
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    if vertex.count == 0 {
        return Err(Error::InvalidData("PLY file declares 0 vertices".into()));
    }
    let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
    let mut body = lines.filter(|(_, l)| !l.is_empty()).skip(skip);
    let mut points = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        let (m, l) = body.next().ok_or_else(|| Error::Parse {
            line: header_end,
            detail: format!("file ends after {} of {} vertices", points.len(), vertex.count),
        })?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() < vertex.properties.len() {
            return Err(Error::Parse {
                line: m,
                detail: format!("expected {} values, found {}", vertex.properties.len(), tokens.len()),
            });
        }
        points.push(Point3::new(
            parse_f64(tokens[cx], m)?,
            parse_f64(tokens[cy], m)?,
            parse_f64(tokens[cz], m)?,
        ));
    }
    Ok(points)
}
