use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use roboprep::episode::{discover_packs, save_episode};
use roboprep::unify::{EmbodimentDescriptor, UnifiedLayout};
use roboprep::{load_episode, Episode, Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        file: path.display().to_string(),
        message: format!("{}:{}: {e}", e.line(), e.column()),
    })
}

/// Loads every pack under `root` (or `root` itself), sorted by episode id.
pub fn load_corpus(root: &Path) -> Result<Vec<Episode>> {
    let packs = discover_packs(root)?;
    if packs.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no episode packs under {}",
            root.display()
        )));
    }
    let mut eps: Vec<Episode> = packs
        .par_iter()
        .map(|p| load_episode(p))
        .collect::<Result<_>>()?;
    eps.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = eps.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Domain(format!("duplicate episode id {:?}", w[0].id)));
    }
    Ok(eps)
}

/// Writes each episode to `<dir>/<id>`.
pub fn save_all(eps: &[Episode], dir: &Path) -> Result<()> {
    eps.par_iter()
        .try_for_each(|ep| save_episode(ep, &dir.join(&ep.id)))
}

/// Descriptors from every `*.json` in `dir`, keyed by embodiment id.
pub fn load_descriptors(dir: &Path) -> Result<BTreeMap<String, EmbodimentDescriptor>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    let mut out = BTreeMap::new();
    for f in files {
        let d = EmbodimentDescriptor::load(&f)?;
        let id = d.embodiment_id().to_string();
        if out.insert(id.clone(), d).is_some() {
            return Err(Error::Descriptor(format!(
                "{}: embodiment {id:?} is described twice",
                f.display()
            )));
        }
    }
    Ok(out)
}

pub fn descriptor_for<'a>(
    descs: &'a BTreeMap<String, EmbodimentDescriptor>,
    ep: &Episode,
) -> Result<&'a EmbodimentDescriptor> {
    descs.get(&ep.embodiment_id).ok_or_else(|| {
        Error::Descriptor(format!(
            "no descriptor for embodiment {:?} (episode {})",
            ep.embodiment_id, ep.id
        ))
    })
}

pub fn load_layout(path: Option<&Path>) -> Result<UnifiedLayout> {
    match path {
        Some(p) => UnifiedLayout::load(p),
        None => Ok(UnifiedLayout::default_layout()),
    }
}

fn lexical_absolute(p: &Path) -> Result<PathBuf> {
    let base = if p.is_absolute() {
        PathBuf::new()
    } else {
        std::env::current_dir().map_err(|e| io_err(p, e))?
    };
    let mut out = PathBuf::new();
    for c in base.join(p).components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    Ok(out)
}

/// Resolves symlinks along the longest existing prefix of `p`.
fn resolved(p: &Path) -> Result<PathBuf> {
    let abs = lexical_absolute(p)?;
    let mut existing = abs.as_path();
    let mut rest = Vec::new();
    while !existing.exists() {
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_owned());
                existing = parent;
            }
            _ => break,
        }
    }
    let mut out = existing.canonicalize().unwrap_or_else(|_| existing.into());
    out.extend(rest.iter().rev());
    Ok(out)
}

/// Refuses output locations that coincide with the input root or fall inside
/// an input pack, so no command can overwrite its own sources.
pub fn guard_output(input: &Path, out: &Path) -> Result<()> {
    let out_abs = resolved(out)?;
    let in_abs = resolved(input)?;
    let clash = |what: &str| {
        Err(Error::Domain(format!(
            "output {} would write into {what} {}",
            out.display(),
            input.display()
        )))
    };
    if out_abs == in_abs {
        return clash("the input");
    }
    for pack in discover_packs(input)? {
        if out_abs.starts_with(resolved(&pack)?) {
            return clash("an episode pack under");
        }
    }
    Ok(())
}

/// `rel` against the directory holding `file`, unless already absolute.
pub fn relative_to(file: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        file.parent().unwrap_or(Path::new("")).join(rel)
    }
}

pub fn f32_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}
