use std::io::{BufRead, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Instant;

use homelearn_core::learning::{FeedbackChannel, FeedbackPrompt};

/// Asks on stderr and reads answers from stdin. An empty line or the
/// timeout leaves the plan in charge.
pub struct StdinChannel {
    lines: Receiver<String>,
}

impl StdinChannel {
    pub fn spawn() -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in std::io::stdin().lock().lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        StdinChannel { lines: rx }
    }
}

impl FeedbackChannel for StdinChannel {
    fn ask(&mut self, prompt: FeedbackPrompt) -> homelearn_core::Result<Option<String>> {
        let deadline = Instant::now() + prompt.timeout;
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "state {}: plan is {}", prompt.state, prompt.plan_action);
        let _ = writeln!(err, "  options: {}", prompt.actions.join(" "));
        let _ = write!(err, "  your action (blank for plan): ");
        let _ = err.flush();
        drop(err);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) => {
                    let answer = line.trim();
                    if answer.is_empty() {
                        return Ok(None);
                    }
                    if prompt.actions.iter().any(|a| a == answer) {
                        return Ok(Some(answer.to_owned()));
                    }
                    eprint!("  `{answer}` is not an option, try again: ");
                }
                Err(RecvTimeoutError::Timeout) => {
                    eprintln!("\n  no answer, using the plan");
                    return Ok(None);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    eprintln!();
                    return Ok(None);
                }
            }
        }
    }
}
