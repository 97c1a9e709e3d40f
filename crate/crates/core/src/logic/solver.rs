//! External SMT-LIB2 solver processes.
//!
//! A [`SolverProc`] is a long-lived child process speaking incremental
//! SMT-LIB2 over stdin/stdout (`z3 -in`, cvc5 --incremental, or the bundled
//! WASM wrapper all work). Queries are separated by `(reset)`. A
//! [`SolverPool`] shares a few such processes between worker threads and
//! memoizes outcomes per script.

use super::{Sort, Value};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("failed to start solver `{0}`: {1}")]
    Spawn(String, std::io::Error),
    #[error("solver pipe closed")]
    Closed,
    #[error("solver i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver timeout after {0:?}")]
    Timeout(Duration),
    #[error("unexpected solver output: {0}")]
    Protocol(String),
}

/// How to start a solver and how long one query may run.
#[derive(Debug, Clone)]
pub struct SolverCmd {
    pub argv: Vec<String>,
    pub timeout: Duration,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

impl SolverCmd {
    pub fn new(argv: Vec<String>) -> SolverCmd {
        SolverCmd {
            argv,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Parse a command string of whitespace-separated words.
    pub fn parse(spec: &str) -> Option<SolverCmd> {
        let argv: Vec<String> = spec.split_whitespace().map(str::to_string).collect();
        if argv.is_empty() {
            None
        } else {
            Some(SolverCmd::new(argv))
        }
    }

    /// Locate a solver: `CARDKIT_SOLVER`, then `z3 -in` on PATH, then the
    /// repo-local WASM wrapper relative to the given roots.
    pub fn discover(extra_roots: &[std::path::PathBuf]) -> Option<SolverCmd> {
        if let Ok(spec) = std::env::var("CARDKIT_SOLVER") {
            if let Some(cmd) = SolverCmd::parse(&spec) {
                return Some(cmd);
            }
        }
        if which("z3").is_some() {
            return Some(SolverCmd::new(vec!["z3".into(), "-in".into()]));
        }
        if which("node").is_some() {
            for root in extra_roots {
                let wrapper = root.join("tools/z3-wasm/smt-repl.js");
                let deps = root.join("tools/z3-wasm/node_modules");
                if wrapper.is_file() && deps.is_dir() {
                    return Some(SolverCmd::new(vec![
                        "node".into(),
                        wrapper.to_string_lossy().into_owned(),
                    ]));
                }
            }
        }
        None
    }
}

fn which(bin: &str) -> Option<std::path::PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let candidate = dir.join(bin);
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

/// One query's outcome at the solver level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Option<Vec<(String, Value)>>),
    Unsat,
    Unknown(String),
}

/// A live solver child process.
pub struct SolverProc {
    cmd: SolverCmd,
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    lines: Option<Receiver<String>>,
    queries: usize,
}

impl SolverProc {
    pub fn new(cmd: SolverCmd) -> SolverProc {
        SolverProc {
            cmd,
            child: None,
            stdin: None,
            lines: None,
            queries: 0,
        }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    fn ensure_running(&mut self) -> Result<(), SolverError> {
        if self.child.is_some() {
            return Ok(());
        }
        let mut command = Command::new(&self.cmd.argv[0]);
        command
            .args(&self.cmd.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let mut child = command
            .spawn()
            .map_err(|e| SolverError::Spawn(self.cmd.argv.join(" "), e))?;
        let stdin = child.stdin.take().ok_or(SolverError::Closed)?;
        let stdout = child.stdout.take().ok_or(SolverError::Closed)?;
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        self.child = Some(child);
        self.stdin = Some(stdin);
        self.lines = Some(rx);
        Ok(())
    }

    fn kill(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
        self.stdin = None;
        self.lines = None;
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        let stdin = self.stdin.as_mut().ok_or(SolverError::Closed)?;
        stdin.write_all(text.as_bytes())?;
        stdin.flush()?;
        Ok(())
    }

    fn next_line(&mut self, deadline: Instant) -> Result<String, SolverError> {
        let rx = self.lines.as_ref().ok_or(SolverError::Closed)?;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(SolverError::Timeout(self.cmd.timeout));
            }
            match rx.recv_timeout(deadline - now) {
                Ok(line) => {
                    let trimmed = line.trim().to_string();
                    if trimmed.is_empty() || trimmed.starts_with(';') {
                        continue;
                    }
                    return Ok(trimmed);
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(SolverError::Timeout(self.cmd.timeout))
                }
                Err(RecvTimeoutError::Disconnected) => return Err(SolverError::Closed),
            }
        }
    }

    /// Run one validity script (ending in `(check-sat)`), optionally asking
    /// for values of the given symbols on sat.
    pub fn check(
        &mut self,
        script: &str,
        witness_syms: &[(String, Sort)],
    ) -> Result<SolverVerdict, SolverError> {
        let attempt = self.check_inner(script, witness_syms);
        if matches!(
            attempt,
            Err(SolverError::Timeout(_)) | Err(SolverError::Closed) | Err(SolverError::Io(_))
        ) {
            // Leave no wedged process behind; the next query respawns.
            self.kill();
        }
        attempt
    }

    fn check_inner(
        &mut self,
        script: &str,
        witness_syms: &[(String, Sort)],
    ) -> Result<SolverVerdict, SolverError> {
        self.ensure_running()?;
        self.queries += 1;
        let deadline = Instant::now() + self.cmd.timeout;
        self.send("(reset)\n")?;
        self.send(script)?;
        let verdict = self.next_line(deadline)?;
        match verdict.as_str() {
            "unsat" => Ok(SolverVerdict::Unsat),
            "unknown" | "timeout" => Ok(SolverVerdict::Unknown(verdict)),
            "sat" => {
                if witness_syms.is_empty() {
                    return Ok(SolverVerdict::Sat(None));
                }
                let mut req = String::from("(get-value (");
                for (i, (sym, _)) in witness_syms.iter().enumerate() {
                    if i > 0 {
                        req.push(' ');
                    }
                    req.push_str(sym);
                }
                req.push_str("))\n");
                self.send(&req)?;
                let sexpr = self.read_sexpr(deadline)?;
                Ok(SolverVerdict::Sat(parse_witness(&sexpr, witness_syms)))
            }
            other if other.starts_with("(error") => Err(SolverError::Protocol(other.to_string())),
            other => Err(SolverError::Protocol(other.to_string())),
        }
    }

    /// Read one balanced s-expression, possibly spread over several lines.
    fn read_sexpr(&mut self, deadline: Instant) -> Result<String, SolverError> {
        let mut buf = String::new();
        loop {
            let line = self.next_line(deadline)?;
            if buf.is_empty() && line.starts_with("(error") {
                // Model unavailable (e.g. arrays with quantifiers); callers
                // treat a missing witness as "sat without model".
                return Ok(line);
            }
            buf.push_str(&line);
            buf.push(' ');
            if balanced(&buf) {
                return Ok(buf);
            }
        }
    }
}

impl Drop for SolverProc {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            let _ = self.send("(exit)\n");
        }
        self.kill();
    }
}

fn balanced(s: &str) -> bool {
    let mut depth = 0i64;
    let mut any = false;
    let mut in_str = false;
    for c in s.chars() {
        if in_str {
            if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '(' => {
                depth += 1;
                any = true;
            }
            ')' => depth -= 1,
            _ => {}
        }
    }
    any && depth <= 0
}

// Minimal s-expression reader for (get-value ...) responses.

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

fn tokenize(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn parse_sexpr(toks: &[String], pos: &mut usize) -> Option<Sexpr> {
    if *pos >= toks.len() {
        return None;
    }
    let tok = &toks[*pos];
    *pos += 1;
    if tok == "(" {
        let mut items = Vec::new();
        while *pos < toks.len() && toks[*pos] != ")" {
            items.push(parse_sexpr(toks, pos)?);
        }
        if *pos < toks.len() {
            *pos += 1; // consume ')'
        }
        Some(Sexpr::List(items))
    } else if tok == ")" {
        None
    } else {
        Some(Sexpr::Atom(tok.clone()))
    }
}

fn sexpr_int(e: &Sexpr) -> Option<i64> {
    match e {
        Sexpr::Atom(a) => a.parse().ok(),
        Sexpr::List(items) => match items.as_slice() {
            [Sexpr::Atom(minus), inner] if minus == "-" => Some(-sexpr_int(inner)?),
            _ => None,
        },
    }
}

fn sexpr_value(e: &Sexpr, sort: &Sort) -> Option<Value> {
    match sort {
        Sort::Int => sexpr_int(e).map(Value::Int),
        Sort::Bool => match e {
            Sexpr::Atom(a) if a == "true" => Some(Value::Bool(true)),
            Sexpr::Atom(a) if a == "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Sort::Array(_, len) => {
            let mut arr = vec![0i64; *len];
            fill_array(e, &mut arr)?;
            Some(Value::Arr(arr))
        }
    }
}

/// Interpret `((as const ...) k)` / `(store base i v)` chains as an array.
fn fill_array(e: &Sexpr, arr: &mut [i64]) -> Option<()> {
    match e {
        Sexpr::List(items) => match items.as_slice() {
            [Sexpr::List(head), v] if head.first() == Some(&Sexpr::Atom("as".into())) => {
                let fill = sexpr_int(v)?;
                for slot in arr.iter_mut() {
                    *slot = fill;
                }
                Some(())
            }
            [Sexpr::Atom(st), base, i, v] if st == "store" => {
                fill_array(base, arr)?;
                let idx = sexpr_int(i)?;
                let val = sexpr_int(v)?;
                if idx >= 0 && (idx as usize) < arr.len() {
                    arr[idx as usize] = val;
                }
                Some(())
            }
            _ => None,
        },
        _ => None,
    }
}

fn parse_witness(raw: &str, syms: &[(String, Sort)]) -> Option<Vec<(String, Value)>> {
    let toks = tokenize(raw);
    let mut pos = 0;
    let top = parse_sexpr(&toks, &mut pos)?;
    let pairs = match top {
        Sexpr::List(items) => items,
        _ => return None,
    };
    let mut out = Vec::new();
    for pair in pairs {
        if let Sexpr::List(kv) = pair {
            if kv.len() == 2 {
                if let Sexpr::Atom(name) = &kv[0] {
                    if let Some((_, sort)) = syms.iter().find(|(s, _)| s == name) {
                        if let Some(v) = sexpr_value(&kv[1], sort) {
                            out.push((name.clone(), v));
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// A fixed-size pool of solver processes shared across threads, with a
/// per-script memo table.
pub struct SolverPool {
    slots: Vec<Mutex<SolverProc>>,
    next: AtomicUsize,
    cache: Mutex<HashMap<String, SolverVerdict>>,
}

impl SolverPool {
    pub fn new(cmd: SolverCmd, size: usize) -> SolverPool {
        let size = size.max(1);
        SolverPool {
            slots: (0..size).map(|_| Mutex::new(SolverProc::new(cmd.clone()))).collect(),
            next: AtomicUsize::new(0),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn size(&self) -> usize {
        self.slots.len()
    }

    pub fn check(
        &self,
        script: &str,
        witness_syms: &[(String, Sort)],
    ) -> Result<SolverVerdict, SolverError> {
        if let Some(hit) = self.cache.lock().unwrap().get(script) {
            return Ok(hit.clone());
        }
        let idx = self.next.fetch_add(1, Ordering::Relaxed) % self.slots.len();
        let verdict = {
            let mut proc = self.slots[idx].lock().unwrap();
            proc.check(script, witness_syms)?
        };
        self.cache
            .lock()
            .unwrap()
            .insert(script.to_string(), verdict.clone());
        Ok(verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_parsing_handles_ints_bools_arrays() {
        let syms = vec![
            ("x".to_string(), Sort::Int),
            ("b".to_string(), Sort::Bool),
            ("a".to_string(), Sort::array_of_int(3)),
        ];
        let raw = "((x (- 2)) (b true) (a (store ((as const (Array Int Int)) 1) 0 7)))";
        let w = parse_witness(raw, &syms).unwrap();
        assert_eq!(w[0], ("x".to_string(), Value::Int(-2)));
        assert_eq!(w[1], ("b".to_string(), Value::Bool(true)));
        assert_eq!(w[2], ("a".to_string(), Value::Arr(vec![7, 1, 1])));
    }

    #[test]
    fn parse_cmd_splits_words() {
        let cmd = SolverCmd::parse("node tools/z3-wasm/smt-repl.js").unwrap();
        assert_eq!(cmd.argv.len(), 2);
        assert!(SolverCmd::parse("   ").is_none());
    }
}
