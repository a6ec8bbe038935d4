//! A small POSIX-flavoured command interpreter over the jailed sandbox.
//!
//! Supports quoting, the chain operators `&&`, `||`, `;`, `|`, `&` and
//! output redirection with `>` / `>>`. Background `&` runs sequentially.
//! Built-ins cover the file operations agents and setup plans use; anything
//! else exits 127.

use super::sandbox::{EntryKind, JailPath, Sandbox};
use super::EnvError;

/// Commands that need elevated privileges and are always refused.
const PRIVILEGED: &[&str] = &[
    "sudo", "su", "doas", "chown", "chgrp", "mount", "umount", "apt", "apt-get", "dpkg", "systemctl",
    "service", "reboot", "shutdown", "useradd", "passwd",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Word(String),
    Op(ChainOp),
    Redirect { append: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainOp {
    And,
    Or,
    Seq,
    Pipe,
    Background,
}

impl ChainOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainOp::And => "&&",
            ChainOp::Or => "||",
            ChainOp::Seq => ";",
            ChainOp::Pipe => "|",
            ChainOp::Background => "&",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("unterminated quote")]
    UnterminatedQuote,
    #[error("missing command around `{0}`")]
    EmptyCommand(&'static str),
    #[error("redirection without a target")]
    DanglingRedirect,
}

pub fn tokenize(line: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut in_word = false;
    let mut chars = line.chars().peekable();
    let flush = |word: &mut String, in_word: &mut bool, out: &mut Vec<Token>| {
        if *in_word {
            out.push(Token::Word(std::mem::take(word)));
            *in_word = false;
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('\'') => break,
                        Some(ch) => word.push(ch),
                        None => return Err(SyntaxError::UnterminatedQuote),
                    }
                }
            }
            '"' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(ch @ ('"' | '\\' | '$')) => word.push(ch),
                            Some('n') => word.push('\n'),
                            Some(ch) => {
                                word.push('\\');
                                word.push(ch);
                            }
                            None => return Err(SyntaxError::UnterminatedQuote),
                        },
                        Some(ch) => word.push(ch),
                        None => return Err(SyntaxError::UnterminatedQuote),
                    }
                }
            }
            '\\' => {
                in_word = true;
                if let Some(ch) = chars.next() {
                    word.push(ch);
                }
            }
            c if c.is_whitespace() => flush(&mut word, &mut in_word, &mut out),
            '&' | '|' | ';' | '>' => {
                flush(&mut word, &mut in_word, &mut out);
                let doubled = chars.peek() == Some(&c);
                let tok = match (c, doubled) {
                    ('&', true) => Token::Op(ChainOp::And),
                    ('&', false) => Token::Op(ChainOp::Background),
                    ('|', true) => Token::Op(ChainOp::Or),
                    ('|', false) => Token::Op(ChainOp::Pipe),
                    (';', _) => Token::Op(ChainOp::Seq),
                    ('>', d) => Token::Redirect { append: d },
                    _ => unreachable!(),
                };
                if doubled && c != ';' {
                    chars.next();
                }
                out.push(tok);
            }
            c => {
                in_word = true;
                word.push(c);
            }
        }
    }
    flush(&mut word, &mut in_word, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleCommand {
    pub argv: Vec<String>,
    pub redirect: Option<(bool, String)>,
}

/// A command line as a list of simple commands with the operator that
/// follows each one (`None` for the last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandLine {
    pub commands: Vec<(SimpleCommand, Option<ChainOp>)>,
}

pub fn parse(line: &str) -> Result<CommandLine, SyntaxError> {
    let mut commands = Vec::new();
    let mut cur = SimpleCommand { argv: Vec::new(), redirect: None };
    let mut pending_redirect: Option<bool> = None;
    for tok in tokenize(line)? {
        match tok {
            Token::Word(w) => {
                if let Some(append) = pending_redirect.take() {
                    cur.redirect = Some((append, w));
                } else {
                    cur.argv.push(w);
                }
            }
            Token::Redirect { append } => {
                if pending_redirect.is_some() {
                    return Err(SyntaxError::DanglingRedirect);
                }
                pending_redirect = Some(append);
            }
            Token::Op(op) => {
                if pending_redirect.is_some() {
                    return Err(SyntaxError::DanglingRedirect);
                }
                if cur.argv.is_empty() {
                    return Err(SyntaxError::EmptyCommand(op.as_str()));
                }
                commands.push((std::mem::replace(&mut cur, SimpleCommand { argv: Vec::new(), redirect: None }), Some(op)));
            }
        }
    }
    if pending_redirect.is_some() {
        return Err(SyntaxError::DanglingRedirect);
    }
    if !cur.argv.is_empty() {
        commands.push((cur, None));
    } else if let Some((_, Some(op))) = commands.last() {
        // a trailing `&` or `;` is allowed, anything else dangles
        if !matches!(op, ChainOp::Background | ChainOp::Seq) {
            return Err(SyntaxError::EmptyCommand(op.as_str()));
        }
    }
    Ok(CommandLine { commands })
}

/// The individual commands of a chained command line, as written.
pub fn split_chain(line: &str) -> Result<Vec<Vec<String>>, SyntaxError> {
    Ok(parse(line)?.commands.into_iter().map(|(c, _)| c.argv).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Interpreter state for one command line.
pub struct Shell<'a> {
    pub sandbox: &'a Sandbox,
    pub cwd: JailPath,
    /// Effective byte limit for this invocation.
    pub limit: u64,
    /// Set while a storage-full condition refuses every write.
    pub storage_full: bool,
    /// Set when a write was refused for lack of space.
    pub write_blocked: bool,
}

const ENOSPC: &str = "No space left on device";

impl<'a> Shell<'a> {
    pub fn new(sandbox: &'a Sandbox, cwd: JailPath) -> Self {
        let limit = sandbox.quota();
        Shell { sandbox, cwd, limit, storage_full: false, write_blocked: false }
    }

    pub fn run(&mut self, line: &str) -> Result<Output, EnvError> {
        let parsed = match parse(line) {
            Ok(p) => p,
            Err(e) => {
                return Ok(Output { code: 2, stdout: String::new(), stderr: format!("sh: syntax error: {e}\n") })
            }
        };
        let mut out = Output::default();
        let mut last_code = 0;
        let mut skip = false;
        let mut pipe_in: Option<String> = None;
        let mut prev_op: Option<ChainOp> = None;
        for (cmd, op) in parsed.commands {
            if let Some(p) = prev_op {
                skip = match p {
                    ChainOp::And => last_code != 0,
                    ChainOp::Or => last_code == 0,
                    ChainOp::Seq | ChainOp::Background => false,
                    ChainOp::Pipe => skip,
                };
            }
            prev_op = op;
            if skip {
                if op != Some(ChainOp::Pipe) {
                    pipe_in = None;
                }
                continue;
            }
            let stdin = pipe_in.take().unwrap_or_default();
            let r = self.exec(&cmd, &stdin)?;
            out.stderr.push_str(&r.stderr);
            last_code = r.code;
            if op == Some(ChainOp::Pipe) {
                pipe_in = Some(r.stdout);
            } else {
                out.stdout.push_str(&r.stdout);
            }
        }
        out.code = last_code;
        Ok(out)
    }

    fn exec(&mut self, cmd: &SimpleCommand, stdin: &str) -> Result<Output, EnvError> {
        let name = cmd.argv[0].as_str();
        if PRIVILEGED.contains(&name) {
            return Err(EnvError::PrivilegeDenied(cmd.argv.join(" ")));
        }
        let args: Vec<&str> = cmd.argv[1..].iter().map(String::as_str).collect();
        let mut r = match name {
            "pwd" => ok(format!("{}\n", self.cwd.display())),
            "cd" => self.cd(&args)?,
            "echo" => {
                let (newline, rest) = match args.first() {
                    Some(&"-n") => (false, &args[1..]),
                    _ => (true, &args[..]),
                };
                ok(format!("{}{}", rest.join(" "), if newline { "\n" } else { "" }))
            }
            "true" => ok(String::new()),
            "false" => fail(1, String::new()),
            "cat" => self.cat(&args, stdin)?,
            "ls" => self.ls(&args)?,
            "find" => self.find(&args)?,
            "mkdir" => self.mkdir(&args)?,
            "touch" => self.touch(&args)?,
            "cp" => self.cp(&args)?,
            "mv" => self.mv(&args)?,
            "rm" => self.rm(&args)?,
            "tee" => self.tee(&args, stdin)?,
            "wc" => wc(&args, stdin),
            "head" => head(&args, stdin),
            "grep" => self.grep(&args, stdin)?,
            _ => fail(127, format!("{name}: command not found\n")),
        };
        if let Some((append, target)) = &cmd.redirect {
            if target != "/dev/null" {
                let p = self.sandbox.resolve(&self.cwd, target)?;
                let data = std::mem::take(&mut r.stdout);
                if let Err(e) = self.write_file(&p, data.as_bytes(), *append) {
                    return Ok(fail(1, format!("sh: {target}: {e}\n")));
                }
            } else {
                r.stdout.clear();
            }
        }
        Ok(r)
    }

    fn path(&self, arg: &str) -> Result<JailPath, EnvError> {
        self.sandbox.resolve(&self.cwd, arg)
    }

    fn guard_write(&mut self, grow: i64) -> Result<(), String> {
        if self.storage_full || !self.sandbox.fits(grow, self.limit) {
            self.write_blocked = true;
            return Err(ENOSPC.into());
        }
        Ok(())
    }

    fn write_file(&mut self, p: &JailPath, data: &[u8], append: bool) -> Result<(), String> {
        if self.sandbox.kind(p) == Some(EntryKind::Dir) {
            return Err("Is a directory".into());
        }
        match p.parent() {
            Some(parent) if self.sandbox.kind(&parent) != Some(EntryKind::Dir) => {
                return Err("not found".into());
            }
            _ => {}
        }
        let old = if append { 0 } else { self.sandbox.file_len(p) as i64 };
        self.guard_write(data.len() as i64 - old)?;
        self.sandbox.write(p, data, append).map_err(|e| e.to_string())
    }

    fn cd(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let target = args.first().copied().unwrap_or("~");
        let p = self.path(target)?;
        if self.sandbox.kind(&p) != Some(EntryKind::Dir) {
            return Ok(fail(1, format!("cd: {target}: not found\n")));
        }
        self.cwd = p;
        Ok(ok(String::new()))
    }

    fn cat(&mut self, args: &[&str], stdin: &str) -> Result<Output, EnvError> {
        if args.is_empty() {
            return Ok(ok(stdin.to_string()));
        }
        let mut o = Output::default();
        for a in args {
            let p = self.path(a)?;
            match self.sandbox.kind(&p) {
                Some(EntryKind::File) => {
                    let data = self.sandbox.read(&p).unwrap_or_default();
                    o.stdout.push_str(&String::from_utf8_lossy(&data));
                }
                Some(EntryKind::Dir) => {
                    o.code = 1;
                    o.stderr.push_str(&format!("cat: {a}: Is a directory\n"));
                }
                None => {
                    o.code = 1;
                    o.stderr.push_str(&format!("cat: {a}: not found\n"));
                }
            }
        }
        Ok(o)
    }

    fn ls(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let all = args.iter().any(|a| a.starts_with('-') && a.contains('a'));
        let targets: Vec<&str> = args.iter().copied().filter(|a| !a.starts_with('-')).collect();
        let targets = if targets.is_empty() { vec!["."] } else { targets };
        let mut o = Output::default();
        let multi = targets.len() > 1;
        for t in targets {
            let p = self.path(t)?;
            match self.sandbox.kind(&p) {
                Some(EntryKind::Dir) => {
                    if multi {
                        o.stdout.push_str(&format!("{t}:\n"));
                    }
                    for n in self.sandbox.list(&p).unwrap_or_default() {
                        if all || !n.starts_with('.') {
                            o.stdout.push_str(&n);
                            o.stdout.push('\n');
                        }
                    }
                }
                Some(EntryKind::File) => o.stdout.push_str(&format!("{t}\n")),
                None => {
                    o.code = 2;
                    o.stderr.push_str(&format!("ls: cannot access '{t}': not found\n"));
                }
            }
        }
        Ok(o)
    }

    fn find(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let t = args.first().copied().unwrap_or(".");
        let p = self.path(t)?;
        if self.sandbox.kind(&p).is_none() {
            return Ok(fail(1, format!("find: '{t}': not found\n")));
        }
        let base = t.trim_end_matches('/');
        let mut s = format!("{base}\n");
        for (c, _) in self.sandbox.walk(&p) {
            let rel = &c.components()[p.components().len()..];
            s.push_str(&format!("{base}/{}\n", rel.join("/")));
        }
        Ok(ok(s))
    }

    fn mkdir(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let parents = args.contains(&"-p");
        let mut o = Output::default();
        for a in args.iter().filter(|a| !a.starts_with('-')) {
            let p = self.path(a)?;
            if self.sandbox.kind(&p).is_some() {
                if !parents {
                    o.code = 1;
                    o.stderr.push_str(&format!("mkdir: cannot create directory '{a}': File exists\n"));
                }
                continue;
            }
            if !parents {
                if let Some(parent) = p.parent() {
                    if self.sandbox.kind(&parent) != Some(EntryKind::Dir) {
                        o.code = 1;
                        o.stderr.push_str(&format!("mkdir: cannot create directory '{a}': not found\n"));
                        continue;
                    }
                }
            }
            if let Err(e) = self.guard_write(0) {
                o.code = 1;
                o.stderr.push_str(&format!("mkdir: cannot create directory '{a}': {e}\n"));
                continue;
            }
            if let Err(e) = self.sandbox.mkdir(&p, parents) {
                o.code = 1;
                o.stderr.push_str(&format!("mkdir: cannot create directory '{a}': {e}\n"));
            }
        }
        Ok(o)
    }

    fn touch(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let mut o = Output::default();
        for a in args.iter().filter(|a| !a.starts_with('-')) {
            let p = self.path(a)?;
            if self.sandbox.kind(&p).is_some() {
                continue;
            }
            if let Err(e) = self.write_file(&p, b"", true) {
                o.code = 1;
                o.stderr.push_str(&format!("touch: cannot touch '{a}': {e}\n"));
            }
        }
        Ok(o)
    }

    fn cp(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let recursive = args.iter().any(|a| a.starts_with('-') && (a.contains('r') || a.contains('R')));
        let paths: Vec<&str> = args.iter().copied().filter(|a| !a.starts_with('-')).collect();
        let [src, dst] = paths[..] else {
            return Ok(fail(1, "cp: expected SOURCE DEST\n".into()));
        };
        let s = self.path(src)?;
        let mut d = self.path(dst)?;
        let kind = match self.sandbox.kind(&s) {
            Some(k) => k,
            None => return Ok(fail(1, format!("cp: cannot stat '{src}': not found\n"))),
        };
        if kind == EntryKind::Dir && !recursive {
            return Ok(fail(1, format!("cp: -r not specified; omitting directory '{src}'\n")));
        }
        if self.sandbox.kind(&d) == Some(EntryKind::Dir) {
            d = d.join(s.file_name().unwrap_or("root"));
        }
        if d.starts_with(&s) && kind == EntryKind::Dir {
            return Ok(fail(1, format!("cp: cannot copy a directory, '{src}', into itself\n")));
        }
        match d.parent() {
            Some(parent) if self.sandbox.kind(&parent) != Some(EntryKind::Dir) => {
                return Ok(fail(1, format!("cp: cannot create '{dst}': not found\n")));
            }
            _ => {}
        }
        let grow = self.sandbox.tree_size(&s) as i64;
        if let Err(e) = self.guard_write(grow) {
            return Ok(fail(1, format!("cp: error writing '{dst}': {e}\n")));
        }
        match self.sandbox.copy_tree(&s, &d) {
            Ok(()) => Ok(ok(String::new())),
            Err(e) => Ok(fail(1, format!("cp: {e}\n"))),
        }
    }

    fn mv(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let paths: Vec<&str> = args.iter().copied().filter(|a| !a.starts_with('-')).collect();
        let [src, dst] = paths[..] else {
            return Ok(fail(1, "mv: expected SOURCE DEST\n".into()));
        };
        let s = self.path(src)?;
        let mut d = self.path(dst)?;
        if self.sandbox.kind(&s).is_none() {
            return Ok(fail(1, format!("mv: cannot stat '{src}': not found\n")));
        }
        if self.sandbox.kind(&d) == Some(EntryKind::Dir) {
            d = d.join(s.file_name().unwrap_or("root"));
        }
        if let Err(e) = self.guard_write(0) {
            return Ok(fail(1, format!("mv: cannot move '{src}': {e}\n")));
        }
        match self.sandbox.rename(&s, &d) {
            Ok(()) => Ok(ok(String::new())),
            Err(e) => Ok(fail(1, format!("mv: {e}\n"))),
        }
    }

    fn rm(&mut self, args: &[&str]) -> Result<Output, EnvError> {
        let flags: String = args.iter().filter(|a| a.starts_with('-')).map(|a| &a[1..]).collect();
        let recursive = flags.contains('r') || flags.contains('R');
        let force = flags.contains('f');
        let mut o = Output::default();
        for a in args.iter().filter(|a| !a.starts_with('-')) {
            let p = self.path(a)?;
            if p.is_root() {
                o.code = 1;
                o.stderr.push_str("rm: refusing to remove the home directory\n");
                continue;
            }
            if let Err(e) = self.sandbox.remove(&p, recursive) {
                if !(force && e.kind() == std::io::ErrorKind::NotFound) {
                    o.code = 1;
                    let msg = if e.kind() == std::io::ErrorKind::NotFound { "not found".to_string() } else { e.to_string() };
                    o.stderr.push_str(&format!("rm: cannot remove '{a}': {msg}\n"));
                }
            }
        }
        Ok(o)
    }

    fn tee(&mut self, args: &[&str], stdin: &str) -> Result<Output, EnvError> {
        let append = args.contains(&"-a");
        let mut o = ok(stdin.to_string());
        for a in args.iter().filter(|a| !a.starts_with('-')) {
            let p = self.path(a)?;
            if let Err(e) = self.write_file(&p, stdin.as_bytes(), append) {
                o.code = 1;
                o.stderr.push_str(&format!("tee: {a}: {e}\n"));
            }
        }
        Ok(o)
    }

    fn grep(&mut self, args: &[&str], stdin: &str) -> Result<Output, EnvError> {
        let Some((pattern, files)) = args.split_first() else {
            return Ok(fail(2, "grep: missing pattern\n".into()));
        };
        let mut text = String::new();
        if files.is_empty() {
            text.push_str(stdin);
        } else {
            let r = self.cat(files, "")?;
            if r.code != 0 {
                return Ok(fail(2, r.stderr.replace("cat:", "grep:")));
            }
            text = r.stdout;
        }
        let hits: Vec<&str> = text.lines().filter(|l| l.contains(pattern)).collect();
        if hits.is_empty() {
            Ok(fail(1, String::new()))
        } else {
            Ok(ok(hits.iter().map(|l| format!("{l}\n")).collect()))
        }
    }
}

fn ok(stdout: String) -> Output {
    Output { code: 0, stdout, stderr: String::new() }
}

fn fail(code: i32, stderr: String) -> Output {
    Output { code, stdout: String::new(), stderr }
}

fn wc(args: &[&str], stdin: &str) -> Output {
    let n = match args.first() {
        Some(&"-l") => stdin.lines().count(),
        Some(&"-c") => stdin.len(),
        _ => stdin.split_whitespace().count(),
    };
    ok(format!("{n}\n"))
}

fn head(args: &[&str], stdin: &str) -> Output {
    let n = match args {
        ["-n", n, ..] => n.parse().unwrap_or(10),
        _ => 10,
    };
    ok(stdin.lines().take(n).map(|l| format!("{l}\n")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(sb: &Sandbox, line: &str) -> Result<Output, EnvError> {
        Shell::new(sb, JailPath::root()).run(line)
    }

    #[test]
    fn tokenizes_operators_and_quotes() {
        let t = tokenize("echo 'a && b' \"c|d\" && ls|wc -l; x & y >> f").unwrap();
        assert_eq!(t[1], Token::Word("a && b".into()));
        assert_eq!(t[2], Token::Word("c|d".into()));
        assert_eq!(t[3], Token::Op(ChainOp::And));
        assert!(t.contains(&Token::Op(ChainOp::Pipe)));
        assert!(t.contains(&Token::Op(ChainOp::Seq)));
        assert!(t.contains(&Token::Op(ChainOp::Background)));
        assert!(t.contains(&Token::Redirect { append: true }));
        assert_eq!(tokenize("echo 'x"), Err(SyntaxError::UnterminatedQuote));
    }

    #[test]
    fn splits_chains() {
        assert_eq!(split_chain("mkdir a && touch a/b | tee log").unwrap().len(), 3);
        assert_eq!(split_chain("echo hi > f").unwrap().len(), 1);
        assert!(split_chain("&& ls").is_err());
    }

    #[test]
    fn file_round_trip() {
        let sb = Sandbox::temporary(1 << 20).unwrap();
        let o = run(&sb, "mkdir -p projects && echo alpha > projects/a.txt && cat projects/a.txt").unwrap();
        assert_eq!(o.code, 0, "{o:?}");
        assert_eq!(o.stdout, "alpha\n");
        let o = run(&sb, "cp -r projects backup && ls backup").unwrap();
        assert_eq!(o.stdout, "a.txt\n");
        let o = run(&sb, "cat nope || echo fallback").unwrap();
        assert_eq!(o.stdout, "fallback\n");
        assert!(o.stderr.contains("not found"));
        let o = run(&sb, "echo one two | wc -w").unwrap();
        assert_eq!(o.stdout, "2\n");
    }

    #[test]
    fn and_chain_stops_on_failure() {
        let sb = Sandbox::temporary(1 << 20).unwrap();
        let o = run(&sb, "cat missing && touch made").unwrap();
        assert_ne!(o.code, 0);
        assert!(run(&sb, "ls made").unwrap().code != 0);
    }

    #[test]
    fn privileged_and_escapes_are_fatal() {
        let sb = Sandbox::temporary(1 << 20).unwrap();
        assert!(matches!(run(&sb, "sudo ls"), Err(EnvError::PrivilegeDenied(_))));
        assert!(matches!(run(&sb, "cat ../../etc/passwd"), Err(EnvError::JailViolation(_))));
        assert!(matches!(run(&sb, "echo x > /etc/motd"), Err(EnvError::JailViolation(_))));
        assert_eq!(run(&sb, "echo x > /dev/null").unwrap().stdout, "");
    }

    #[test]
    fn quota_refuses_large_writes() {
        let sb = Sandbox::temporary(8).unwrap();
        let o = run(&sb, "echo 0123456789 > big").unwrap();
        assert_ne!(o.code, 0);
        assert!(o.stderr.contains("space"));
        assert_eq!(run(&sb, "echo 123 > small").unwrap().code, 0);
    }

    #[test]
    fn unknown_command_exits_127() {
        let sb = Sandbox::temporary(1 << 20).unwrap();
        assert_eq!(run(&sb, "frobnicate").unwrap().code, 127);
    }
}
