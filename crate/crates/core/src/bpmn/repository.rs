//! Content-addressed store of compiled models: one directory per model
//! hash holding the XML, the index maps, the plan and, once applied, the
//! registration.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ParsedModel, Registration, RegistrationPlan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexMap {
    pub scope: usize,
    pub process_id: String,
    pub elements: BTreeMap<String, u32>,
    pub edges: BTreeMap<String, u32>,
}

pub fn index_maps(model: &ParsedModel) -> Vec<IndexMap> {
    model
        .processes
        .iter()
        .enumerate()
        .map(|(scope, p)| IndexMap {
            scope,
            process_id: p.id.clone(),
            elements: p.element_ids.clone(),
            edges: p.edge_ids.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredModel {
    pub model_hash: String,
    pub xml: String,
    pub index_maps: Vec<IndexMap>,
    pub plan: RegistrationPlan,
    pub registration: Option<Registration>,
}

#[derive(Debug, Clone)]
pub struct ProcessRepository {
    root: PathBuf,
}

const XML: &str = "model.bpmn";
const INDEX: &str = "index-maps.json";
const PLAN: &str = "plan.json";
const REGISTRATION: &str = "registration.json";

fn write_json<T: Serialize>(path: &Path, v: &T) -> io::Result<()> {
    fs::write(
        path,
        serde_json::to_vec_pretty(v).map_err(io::Error::other)?,
    )
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<T> {
    serde_json::from_slice(&fs::read(path)?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

impl ProcessRepository {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(ProcessRepository { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, hash: &str) -> io::Result<PathBuf> {
        if hash.is_empty() || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "model hash must be hex",
            ));
        }
        Ok(self.root.join(hash))
    }

    /// Stores the compilation artifacts; storing the same model again
    /// rewrites identical files.
    pub fn store(
        &self,
        xml: &str,
        model: &ParsedModel,
        plan: &RegistrationPlan,
    ) -> io::Result<PathBuf> {
        let dir = self.dir(&model.model_hash)?;
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(XML), xml)?;
        write_json(&dir.join(INDEX), &index_maps(model))?;
        write_json(&dir.join(PLAN), plan)?;
        Ok(dir)
    }

    pub fn save_registration(&self, reg: &Registration) -> io::Result<()> {
        let dir = self.dir(&reg.model_hash)?;
        if !dir.is_dir() {
            return Err(io::Error::new(io::ErrorKind::NotFound, "model not stored"));
        }
        write_json(&dir.join(REGISTRATION), reg)
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.dir(hash)
            .map(|d| d.join(PLAN).is_file())
            .unwrap_or(false)
    }

    /// Stored model hashes, sorted.
    pub fn list(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if self.contains(&name) {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn load(&self, hash: &str) -> io::Result<StoredModel> {
        let dir = self.dir(hash)?;
        let registration = match dir.join(REGISTRATION) {
            p if p.is_file() => Some(read_json(&p)?),
            _ => None,
        };
        Ok(StoredModel {
            model_hash: hash.to_string(),
            xml: fs::read_to_string(dir.join(XML))?,
            index_maps: read_json(&dir.join(INDEX))?,
            plan: read_json(&dir.join(PLAN))?,
            registration,
        })
    }
}
