//! Output routing and run manifests.
//!
//! Without `--out`, results go to standard output. With `--out`, the body is
//! written to the file and a manifest `<path>.manifest.json` is dropped next
//! to it with the resolved configuration, the seeds, the tool version, and an
//! FNV-1a digest of every written file, so a rerun can be checked bit for bit.

use serde_json::json;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub struct OutputSink {
    out: Option<String>,
}

impl OutputSink {
    pub fn new(out: Option<String>) -> Self {
        Self { out }
    }

    /// Writes one body to stdout or to the `--out` file plus manifest.
    pub fn write(
        self,
        body: &str,
        config: &serde_json::Value,
        seeds: &[u64],
    ) -> Result<(), String> {
        self.write_many(&[(body.to_string(), None)], config, seeds)
    }

    /// Writes several outputs; the first goes to the `--out` path itself,
    /// extra ones carry their own paths (sidecars).
    pub fn write_many(
        self,
        bodies: &[(String, Option<String>)],
        config: &serde_json::Value,
        seeds: &[u64],
    ) -> Result<(), String> {
        let Some(out) = self.out else {
            for (body, path) in bodies {
                if path.is_none() {
                    print!("{body}");
                }
            }
            return Ok(());
        };
        let mut outputs = Vec::new();
        for (body, path) in bodies {
            let path = path.clone().unwrap_or_else(|| out.clone());
            std::fs::write(&path, body).map_err(|e| format!("{path}: {e}"))?;
            outputs.push(json!({
                "path": path,
                "bytes": body.len(),
                "fnv1a64": format!("{:016x}", fnv1a64(body.as_bytes())),
            }));
        }
        let manifest = json!({
            "command": config,
            "seeds": seeds,
            "version": env!("CARGO_PKG_VERSION"),
            "outputs": outputs,
        });
        let manifest_path = format!("{out}.manifest.json");
        std::fs::write(
            &manifest_path,
            format!(
                "{}\n",
                serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?
            ),
        )
        .map_err(|e| format!("{manifest_path}: {e}"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::fnv1a64;

    #[test]
    fn digest_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a64(b"time,content\n"), fnv1a64(b"time,content"));
    }
}
