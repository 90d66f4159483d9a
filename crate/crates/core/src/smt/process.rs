use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::model::Pred;

use super::encode::{preamble, query_block};
use super::{Backend, SmtError, Theory, Validity};

/// Answers shared between sessions, keyed by the exact query text.
pub type SolverCache = Arc<Mutex<HashMap<String, Validity>>>;

#[derive(Clone, Debug)]
pub struct SmtConfig {
    pub path: PathBuf,
    pub timeout_ms: u64,
    /// Write every query sent to the solver into this directory.
    pub emit_dir: Option<PathBuf>,
    pub cache: bool,
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig { path: default_solver(), timeout_ms: 5000, emit_dir: None, cache: true }
    }
}

/// `ART_SMT` if set, otherwise `z3` from the search path.
pub fn default_solver() -> PathBuf {
    std::env::var_os("ART_SMT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("z3"))
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<String>,
}

/// One long-lived solver process; each query is a push/pop block.
pub struct SmtSession {
    cfg: SmtConfig,
    preamble: String,
    theory: Theory,
    running: Option<Running>,
    cache: SolverCache,
    emitted: Arc<AtomicUsize>,
    sent: usize,
}

impl SmtSession {
    pub fn new(cfg: SmtConfig, theory: Theory) -> Result<SmtSession, SmtError> {
        Self::with_shared(cfg, theory, SolverCache::default(), Arc::new(AtomicUsize::new(0)))
    }

    /// A session sharing its cache and emission counter with others.
    pub fn with_shared(
        cfg: SmtConfig,
        theory: Theory,
        cache: SolverCache,
        emitted: Arc<AtomicUsize>,
    ) -> Result<SmtSession, SmtError> {
        let preamble = preamble(&theory, cfg.timeout_ms)?;
        if let Some(d) = &cfg.emit_dir {
            std::fs::create_dir_all(d).map_err(|e| SmtError::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(SmtSession { cfg, preamble, theory, running: None, cache, emitted, sent: 0 })
    }

    pub fn cache(&self) -> SolverCache {
        self.cache.clone()
    }

    fn args(&self) -> Vec<&'static str> {
        let name = self.cfg.path.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        if name.contains("cvc") {
            vec!["--lang=smt2", "--incremental"]
        } else {
            vec!["-in", "-smt2"]
        }
    }

    fn start(&mut self) -> Result<&mut Running, SmtError> {
        if self.running.is_none() {
            let path = self.cfg.path.display().to_string();
            let mut child = Command::new(&self.cfg.path)
                .args(self.args())
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .map_err(|e| SmtError::Spawn(path, e.to_string()))?;
            let mut stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let (tx, rx) = channel();
            std::thread::spawn(move || {
                for line in BufReader::new(stdout).lines() {
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
            stdin.write_all(self.preamble.as_bytes()).map_err(|e| SmtError::Io(e.to_string()))?;
            self.running = Some(Running { child, stdin, rx });
        }
        Ok(self.running.as_mut().unwrap())
    }

    fn kill(&mut self) {
        if let Some(mut r) = self.running.take() {
            let _ = r.child.kill();
            let _ = r.child.wait();
        }
    }

    fn send(&mut self, block: &str) -> Result<Validity, SmtError> {
        let wait = Duration::from_millis(self.cfg.timeout_ms + 2000);
        let r = self.start()?;
        if let Err(e) = r.stdin.write_all(block.as_bytes()).and_then(|_| r.stdin.flush()) {
            self.kill();
            return Err(SmtError::Io(e.to_string()));
        }
        let mut error = None;
        loop {
            match r.rx.recv_timeout(wait) {
                Ok(line) => {
                    let l = line.trim();
                    match l {
                        "sat" | "unsat" | "unknown" => {
                            let v = match l {
                                "unsat" => Validity::Valid,
                                "sat" => Validity::Invalid,
                                _ => Validity::Unknown,
                            };
                            if let Some(e) = error {
                                self.kill();
                                return Err(SmtError::Protocol(e));
                            }
                            return Ok(v);
                        }
                        l if l.starts_with("(error") => error = Some(l.to_string()),
                        _ => {}
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    // watchdog: the solver ignored its own timeout
                    self.kill();
                    return Ok(Validity::Unknown);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.kill();
                    return Err(SmtError::Protocol(error.unwrap_or_else(|| "solver exited".into())));
                }
            }
        }
    }
}

impl Backend for SmtSession {
    fn check(&mut self, hyps: &[Pred], goal: &Pred) -> Result<Validity, SmtError> {
        let block = query_block(&self.theory, hyps, goal)?;
        if self.cfg.cache {
            if let Some(v) = self.cache.lock().unwrap().get(&block) {
                return Ok(*v);
            }
        }
        if let Some(d) = &self.cfg.emit_dir {
            let n = self.emitted.fetch_add(1, Ordering::SeqCst) + 1;
            let file = d.join(format!("q{n:05}.smt2"));
            std::fs::write(&file, format!("{}{}", self.preamble, block))
                .map_err(|e| SmtError::Io(format!("{}: {e}", file.display())))?;
        }
        let v = self.send(&block)?;
        self.sent += 1;
        if self.cfg.cache && v != Validity::Unknown {
            self.cache.lock().unwrap().insert(block, v);
        }
        Ok(v)
    }

    fn queries(&self) -> usize {
        self.sent
    }
}

impl Drop for SmtSession {
    fn drop(&mut self) {
        if let Some(r) = self.running.as_mut() {
            let _ = r.stdin.write_all(b"(exit)\n");
            let _ = r.stdin.flush();
        }
        if let Some(mut r) = self.running.take() {
            let _ = r.child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Rel, Term};
    use crate::smt::MeasureDecl;

    fn session() -> SmtSession {
        let th = Theory {
            fields: ["data".to_string(), "next".to_string()].into_iter().collect(),
            measures: vec![MeasureDecl { name: "len".into(), sort: crate::model::MeasSort::Int, null_case: Term::Int(0) }],
        };
        SmtSession::new(SmtConfig::default(), th).unwrap()
    }

    #[test]
    fn inconsistent_antecedent_is_valid() {
        let mut s = session();
        let f = Term::field(Term::var("x2"), "next");
        let hyps = vec![
            Pred::eq(Term::var("xn"), f.clone()),
            Pred::eq(Term::var("xn"), Term::Null),
            Pred::ne(f, Term::Null),
        ];
        assert_eq!(s.check(&hyps, &Pred::False).unwrap(), Validity::Valid);
    }

    #[test]
    fn trivial_and_abs() {
        let mut s = session();
        assert_eq!(s.check(&[], &Pred::True).unwrap(), Validity::Valid);
        let hyps = vec![Pred::rel(Rel::Le, Term::Int(0), Term::var("x")), Pred::eq(Term::nu(), Term::var("x"))];
        assert_eq!(s.check(&hyps, &Pred::rel(Rel::Le, Term::Int(0), Term::nu())).unwrap(), Validity::Valid);
        assert_eq!(s.check(&hyps, &Pred::rel(Rel::Lt, Term::Int(0), Term::nu())).unwrap(), Validity::Invalid);
        assert_eq!(s.queries(), 3);
    }

    #[test]
    fn measure_null_axiom() {
        let mut s = session();
        let goal = Pred::eq(Term::meas("len", Term::Null), Term::Int(0));
        assert_eq!(s.check(&[], &goal).unwrap(), Validity::Valid);
    }

    #[test]
    fn repeated_query_hits_cache() {
        let mut s = session();
        let g = Pred::eq(Term::var("a"), Term::var("a"));
        s.check(&[], &g).unwrap();
        s.check(&[], &g).unwrap();
        assert_eq!(s.queries(), 1);
    }

    #[test]
    fn solver_errors_do_not_poison_the_session() {
        let mut s = session();
        assert!(s.send("(push 1)\n(assert (= undeclared 1))\n(check-sat)\n(pop 1)\n").is_err());
        assert_eq!(s.check(&[], &Pred::True).unwrap(), Validity::Valid);
    }
}
