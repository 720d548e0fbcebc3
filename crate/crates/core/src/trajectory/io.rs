//! Line-delimited JSON play files.
//!
//! The first line is a header object `{tau, m, pitch, frame_rate, teams}`;
//! every following non-blank line is one play record.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentTrajectory, Dataset, Pitch, Play, PlayType};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    tau: usize,
    m: usize,
    pitch: Pitch,
    frame_rate: f64,
    #[serde(default)]
    teams: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    roles_att: Vec<Vec<[f64; 2]>>,
    roles_def: Vec<Vec<[f64; 2]>>,
    label: u8,
    play_type: PlayType,
    att_team: u32,
    def_team: u32,
    is_home: bool,
    clock_s: f64,
    match_id: u32,
}

fn by_role(team: &[AgentTrajectory]) -> Vec<Vec<[f64; 2]>> {
    let mut sorted: Vec<&AgentTrajectory> = team.iter().collect();
    sorted.sort_by_key(|t| t.role_index);
    sorted.into_iter().map(|t| t.points.clone()).collect()
}

impl From<&Play> for Record {
    fn from(p: &Play) -> Self {
        Record {
            roles_att: by_role(&p.attacking),
            roles_def: by_role(&p.defending),
            label: u8::from(p.label),
            play_type: p.play_type,
            att_team: p.attacking_team,
            def_team: p.defending_team,
            is_home: p.is_home,
            clock_s: p.shot_clock_s,
            match_id: p.match_id,
        }
    }
}

impl Record {
    fn into_play(self) -> std::result::Result<Play, String> {
        let label = match self.label {
            0 => false,
            1 => true,
            other => return Err(format!("label must be 0 or 1, got {other}")),
        };
        let team = |roles: Vec<Vec<[f64; 2]>>| {
            roles
                .into_iter()
                .enumerate()
                .map(|(r, pts)| AgentTrajectory::new(r, pts))
                .collect()
        };
        Ok(Play {
            attacking: team(self.roles_att),
            defending: team(self.roles_def),
            label,
            play_type: self.play_type,
            attacking_team: self.att_team,
            defending_team: self.def_team,
            is_home: self.is_home,
            shot_clock_s: self.clock_s,
            match_id: self.match_id,
        })
    }
}

/// Writes a dataset; trajectories are emitted in role order.
pub fn write_plays<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    let header = Header {
        tau: dataset.tau,
        m: dataset.m,
        pitch: dataset.pitch,
        frame_rate: dataset.frame_rate_hz,
        teams: dataset.team_ids.iter().copied().collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for play in &dataset.plays {
        serde_json::to_writer(&mut w, &Record::from(play))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_plays(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_plays(dataset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_plays<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header line".into(),
                })
            }
            Some((i, line)) => {
                let line = line.map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("bad header: {e}"),
                })?;
            }
        }
    };
    let mut plays = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let play = record.into_play().map_err(|message| Error::Parse {
            line: i + 1,
            message,
        })?;
        plays.push(play);
    }
    Dataset::new(
        plays,
        header.tau,
        header.m,
        header.pitch,
        header.frame_rate,
        header.teams,
    )
}

pub fn load_plays(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_plays(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        r#"{"tau":2,"m":2,"pitch":{"length":105.0,"width":68.0},"frame_rate":10.0}"#;

    fn line(frames_def: &str) -> String {
        format!(
            r#"{{"roles_att":[[[1.0,2.0],[1.5,2.5]]],"roles_def":[{frames_def}],"label":1,"play_type":"corner","att_team":3,"def_team":4,"is_home":false,"clock_s":12.5,"match_id":9}}"#
        )
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let d = read_plays(HEADER.as_bytes()).unwrap();
        assert!(d.is_empty());
        assert_eq!((d.tau, d.m), (2, 2));
        assert_eq!(d.pitch, Pitch::default());
    }

    #[test]
    fn parses_record() {
        let text = format!("{HEADER}\n{}\n", line("[[3.0,4.0],[3.0,4.5]]"));
        let d = read_plays(text.as_bytes()).unwrap();
        let p = &d.plays[0];
        assert!(p.label);
        assert_eq!(p.play_type, PlayType::Corner);
        assert_eq!(p.flatten(), vec![1.0, 2.0, 1.5, 2.5, 3.0, 4.0, 3.0, 4.5]);
        assert_eq!(d.team_ids.iter().copied().collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn short_play_is_dimension_error() {
        let text = format!(
            "{HEADER}\n{}\n{}\n",
            line("[[3.0,4.0],[3.0,4.5]]"),
            line("[[3.0,4.0]]")
        );
        match read_plays(text.as_bytes()).unwrap_err() {
            Error::Dimension { play, message } => {
                assert_eq!(play, 1);
                assert!(message.contains("1 frames"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{HEADER}\n{}\n{{not json\n", line("[[3.0,4.0],[3.0,4.5]]"));
        assert!(matches!(
            read_plays(text.as_bytes()).unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
        let text = format!(
            "{HEADER}\n{}\n",
            line("[[3.0,4.0],[3.0,4.5]]").replace("\"label\":1", "\"label\":2")
        );
        assert!(matches!(
            read_plays(text.as_bytes()).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn empty_input_is_parse_error() {
        assert!(matches!(
            read_plays(&b""[..]).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }
}
