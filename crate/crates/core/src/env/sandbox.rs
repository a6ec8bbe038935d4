//! Filesystem jail rooted at a real directory that stands in for
//! `/home/user`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use super::EnvError;

/// Semantic home directory shown to specialists and subject agents.
pub const HOME: &str = "/home/user";

/// A path inside the jail, as components relative to the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JailPath(Vec<String>);

impl JailPath {
    pub fn root() -> Self {
        JailPath(Vec::new())
    }

    pub fn components(&self) -> &[String] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self, name: &str) -> JailPath {
        let mut c = self.0.clone();
        c.push(name.to_string());
        JailPath(c)
    }

    pub fn parent(&self) -> Option<JailPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(JailPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn file_name(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    /// Path relative to the home directory, `""` for the root.
    pub fn relative(&self) -> String {
        self.0.join("/")
    }

    /// Absolute semantic path, e.g. `/home/user/work`.
    pub fn display(&self) -> String {
        if self.0.is_empty() {
            HOME.to_string()
        } else {
            format!("{HOME}/{}", self.0.join("/"))
        }
    }

    pub fn starts_with(&self, other: &JailPath) -> bool {
        self.0.starts_with(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    File,
    Dir,
}

pub struct Sandbox {
    root: PathBuf,
    _tmp: Option<TempDir>,
    quota: u64,
}

impl std::fmt::Debug for Sandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sandbox").field("root", &self.root).field("quota", &self.quota).finish()
    }
}

impl Sandbox {
    /// A sandbox in a fresh temporary directory, removed on drop.
    pub fn temporary(quota: u64) -> io::Result<Self> {
        let tmp = tempfile::Builder::new().prefix("agentprobe-home-").tempdir()?;
        let root = tmp.path().canonicalize()?;
        Ok(Sandbox { root, _tmp: Some(tmp), quota })
    }

    /// A sandbox over an existing directory.
    pub fn at(root: &Path, quota: u64) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Sandbox { root: root.canonicalize()?, _tmp: None, quota })
    }

    pub fn real_root(&self) -> &Path {
        &self.root
    }

    pub fn quota(&self) -> u64 {
        self.quota
    }

    /// Resolves `arg` against `cwd`. Refuses anything that leaves the jail,
    /// names another user's home, or passes through a symlink.
    pub fn resolve(&self, cwd: &JailPath, arg: &str) -> Result<JailPath, EnvError> {
        let violation = || EnvError::JailViolation(arg.to_string());
        if arg.contains('\0') {
            return Err(violation());
        }
        let (mut parts, rest): (Vec<String>, &str) = if let Some(rest) = arg.strip_prefix('~') {
            if !(rest.is_empty() || rest.starts_with('/')) {
                return Err(violation());
            }
            (Vec::new(), rest)
        } else if arg.starts_with('/') {
            let rest = arg.strip_prefix(HOME).ok_or_else(violation)?;
            if !(rest.is_empty() || rest.starts_with('/')) {
                return Err(violation());
            }
            (Vec::new(), rest)
        } else {
            (cwd.0.clone(), arg)
        };
        for comp in rest.split('/') {
            match comp {
                "" | "." => {}
                ".." => {
                    if parts.pop().is_none() {
                        return Err(violation());
                    }
                }
                c => parts.push(c.to_string()),
            }
        }
        let mut real = self.root.clone();
        for c in &parts {
            real.push(c);
            match fs::symlink_metadata(&real) {
                Ok(m) if m.file_type().is_symlink() => return Err(violation()),
                Ok(_) => {}
                Err(_) => break,
            }
        }
        Ok(JailPath(parts))
    }

    fn real(&self, p: &JailPath) -> PathBuf {
        let mut r = self.root.clone();
        for c in &p.0 {
            r.push(c);
        }
        r
    }

    pub fn kind(&self, p: &JailPath) -> Option<EntryKind> {
        let m = fs::symlink_metadata(self.real(p)).ok()?;
        if m.is_dir() {
            Some(EntryKind::Dir)
        } else if m.is_file() {
            Some(EntryKind::File)
        } else {
            None
        }
    }

    pub fn read(&self, p: &JailPath) -> io::Result<Vec<u8>> {
        fs::read(self.real(p))
    }

    /// Bytes currently stored under the root.
    pub fn usage(&self) -> u64 {
        self.walk(&JailPath::root())
            .into_iter()
            .filter(|(_, k)| *k == EntryKind::File)
            .filter_map(|(p, _)| fs::metadata(self.real(&p)).ok())
            .map(|m| m.len())
            .sum()
    }

    /// Every entry below `p` (exclusive), depth first, sorted by name.
    pub fn walk(&self, p: &JailPath) -> Vec<(JailPath, EntryKind)> {
        let mut out = Vec::new();
        self.walk_into(p, &mut out);
        out
    }

    fn walk_into(&self, p: &JailPath, out: &mut Vec<(JailPath, EntryKind)>) {
        for name in self.list(p).unwrap_or_default() {
            let child = p.join(&name);
            match self.kind(&child) {
                Some(EntryKind::Dir) => {
                    out.push((child.clone(), EntryKind::Dir));
                    self.walk_into(&child, out);
                }
                Some(EntryKind::File) => out.push((child, EntryKind::File)),
                None => {}
            }
        }
    }

    pub fn list(&self, p: &JailPath) -> io::Result<Vec<String>> {
        let mut names: Vec<String> = fs::read_dir(self.real(p))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        Ok(names)
    }

    /// Checks a write growing usage by `grow` bytes fits under `limit`.
    pub fn fits(&self, grow: i64, limit: u64) -> bool {
        let after = self.usage() as i64 + grow;
        after <= limit as i64
    }

    pub fn write(&self, p: &JailPath, data: &[u8], append: bool) -> io::Result<()> {
        use std::io::Write;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(self.real(p))?;
        f.write_all(data)
    }

    pub fn file_len(&self, p: &JailPath) -> u64 {
        fs::metadata(self.real(p)).map(|m| m.len()).unwrap_or(0)
    }

    pub fn mkdir(&self, p: &JailPath, parents: bool) -> io::Result<()> {
        if parents {
            fs::create_dir_all(self.real(p))
        } else {
            fs::create_dir(self.real(p))
        }
    }

    pub fn remove(&self, p: &JailPath, recursive: bool) -> io::Result<()> {
        match self.kind(p) {
            Some(EntryKind::Dir) if recursive => fs::remove_dir_all(self.real(p)),
            Some(EntryKind::Dir) => Err(io::Error::other("is a directory")),
            Some(EntryKind::File) => fs::remove_file(self.real(p)),
            None => Err(io::Error::from(io::ErrorKind::NotFound)),
        }
    }

    pub fn rename(&self, from: &JailPath, to: &JailPath) -> io::Result<()> {
        fs::rename(self.real(from), self.real(to))
    }

    /// Total file bytes under `p` (the file itself if `p` is a file).
    pub fn tree_size(&self, p: &JailPath) -> u64 {
        match self.kind(p) {
            Some(EntryKind::File) => self.file_len(p),
            Some(EntryKind::Dir) => self
                .walk(p)
                .into_iter()
                .filter(|(_, k)| *k == EntryKind::File)
                .map(|(c, _)| self.file_len(&c))
                .sum(),
            None => 0,
        }
    }

    pub fn copy_tree(&self, from: &JailPath, to: &JailPath) -> io::Result<()> {
        match self.kind(from) {
            Some(EntryKind::File) => fs::copy(self.real(from), self.real(to)).map(|_| ()),
            Some(EntryKind::Dir) => {
                fs::create_dir_all(self.real(to))?;
                for name in self.list(from)? {
                    self.copy_tree(&from.join(&name), &to.join(&name))?;
                }
                Ok(())
            }
            None => Err(io::Error::from(io::ErrorKind::NotFound)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sb() -> Sandbox {
        Sandbox::temporary(1 << 20).unwrap()
    }

    #[test]
    fn resolves_home_forms() {
        let s = sb();
        let work = JailPath::root().join("work");
        assert_eq!(s.resolve(&work, "a/b").unwrap().relative(), "work/a/b");
        assert_eq!(s.resolve(&work, "~/a").unwrap().relative(), "a");
        assert_eq!(s.resolve(&work, "/home/user/a").unwrap().relative(), "a");
        assert_eq!(s.resolve(&work, "../a").unwrap().relative(), "a");
        assert_eq!(s.resolve(&work, "./x/../y").unwrap().relative(), "work/y");
        assert_eq!(s.resolve(&work, "~").unwrap(), JailPath::root());
    }

    #[test]
    fn refuses_escapes() {
        let s = sb();
        let work = JailPath::root().join("work");
        for bad in ["../../etc/passwd", "/etc/passwd", "/home/userx", "~root/.ssh", "/home", "..", "../.."] {
            if bad == ".." {
                // one level up from work is home itself
                assert!(s.resolve(&work, bad).is_ok());
                continue;
            }
            assert!(
                matches!(s.resolve(&work, bad), Err(EnvError::JailViolation(_))),
                "{bad} escaped"
            );
        }
    }

    #[cfg(unix)]
    #[test]
    fn refuses_symlinks_and_loops() {
        let s = sb();
        std::os::unix::fs::symlink("/etc", s.real_root().join("etc")).unwrap();
        std::os::unix::fs::symlink(s.real_root().join("b"), s.real_root().join("a")).unwrap();
        std::os::unix::fs::symlink(s.real_root().join("a"), s.real_root().join("b")).unwrap();
        for p in ["etc/passwd", "a", "b/c", "~/a"] {
            assert!(matches!(s.resolve(&JailPath::root(), p), Err(EnvError::JailViolation(_))), "{p}");
        }
    }

    fn seg() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("..".to_string()),
            Just(".".to_string()),
            "[a-z]{1,3}".prop_map(|s| s),
        ]
    }

    proptest! {
        /// Any path whose lexical walk climbs above the root is refused, and
        /// every accepted path stays under the real root.
        #[test]
        fn jail_is_complete(depth in 0usize..3, segs in prop::collection::vec(seg(), 1..8), absolute in prop::sample::select(vec!["", "/", "/etc/", "/var/", "/home/user/", "~/"])) {
            let s = sb();
            let cwd = JailPath((0..depth).map(|i| format!("d{i}")).collect());
            let arg = format!("{absolute}{}", segs.join("/"));
            // reference walk
            let mut level: i64 = match absolute {
                "" => depth as i64,
                _ => 0,
            };
            let mut escaped = matches!(absolute, "/" | "/etc/" | "/var/");
            for sgm in &segs {
                match sgm.as_str() {
                    ".." => { level -= 1; if level < 0 { escaped = true; } }
                    "." => {}
                    _ => level += 1,
                }
            }
            match s.resolve(&cwd, &arg) {
                Ok(p) => {
                    prop_assert!(!escaped, "accepted escaping path {}", arg);
                    prop_assert!(s.real(&p).starts_with(s.real_root()));
                }
                Err(EnvError::JailViolation(_)) => prop_assert!(escaped, "refused benign path {}", arg),
                Err(e) => prop_assert!(false, "unexpected {e:?}"),
            }
        }
    }
}
