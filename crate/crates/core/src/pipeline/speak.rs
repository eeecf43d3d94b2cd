use std::collections::HashMap;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use super::Prediction;

/// Speech fires only when confidence is strictly above this.
pub const CONFIDENCE_THRESHOLD: f32 = 0.8;

/// Placeholder replaced by the letter in an external speak command.
pub const LETTER_PLACEHOLDER: &str = "{letter}";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpeakMode {
    /// Emit `SPEAK <letter> <confidence>` lines.
    StdoutEvent,
    /// Run a shell command with `{letter}` substituted.
    ExternalCommand(String),
    Silent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakEvent {
    pub letter: char,
    pub confidence: f32,
}

impl SpeakEvent {
    pub fn line(&self) -> String {
        format!("SPEAK {} {:.5}", self.letter, self.confidence)
    }
}

/// Confidence gate plus per-letter debounce in front of a speech sink.
#[derive(Debug)]
pub struct SpeakHook {
    mode: SpeakMode,
    debounce: Option<Duration>,
    last_spoken: HashMap<char, Instant>,
    children: Vec<Child>,
}

impl SpeakHook {
    pub const DEFAULT_DEBOUNCE: Duration = Duration::from_secs(1);

    /// `debounce: None` disables repetition suppression.
    pub fn new(mode: SpeakMode, debounce: Option<Duration>) -> Self {
        SpeakHook {
            mode,
            debounce,
            last_spoken: HashMap::new(),
            children: Vec::new(),
        }
    }

    pub fn mode(&self) -> &SpeakMode {
        &self.mode
    }

    pub fn gate_and_speak(&mut self, pred: &Prediction) -> Option<SpeakEvent> {
        self.gate_and_speak_at(pred, Instant::now())
    }

    /// Same as [`SpeakHook::gate_and_speak`] with an explicit clock reading.
    pub fn gate_and_speak_at(&mut self, pred: &Prediction, now: Instant) -> Option<SpeakEvent> {
        if self.mode == SpeakMode::Silent || !(pred.confidence > CONFIDENCE_THRESHOLD) {
            return None;
        }
        if let (Some(window), Some(&last)) = (self.debounce, self.last_spoken.get(&pred.letter)) {
            if now.saturating_duration_since(last) < window {
                return None;
            }
        }
        self.last_spoken.insert(pred.letter, now);
        let event = SpeakEvent {
            letter: pred.letter,
            confidence: pred.confidence,
        };
        if let SpeakMode::ExternalCommand(template) = &self.mode {
            let cmd = template.replace(LETTER_PLACEHOLDER, &pred.letter.to_string());
            self.run(&cmd);
        }
        Some(event)
    }

    fn run(&mut self, cmd: &str) {
        self.reap();
        match Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .spawn()
        {
            Ok(child) => self.children.push(child),
            Err(e) => log::warn!("speak command {cmd:?} failed to start: {e}"),
        }
    }

    /// Collects finished speak commands, logging failures.
    fn reap(&mut self) {
        self.children.retain_mut(|child| match child.try_wait() {
            Ok(Some(status)) => {
                if !status.success() {
                    log::warn!("speak command exited with {status}");
                }
                false
            }
            Ok(None) => true,
            Err(e) => {
                log::warn!("speak command wait failed: {e}");
                false
            }
        });
    }

    /// Waits for every outstanding speak command.
    pub fn finish(&mut self) {
        for mut child in self.children.drain(..) {
            match child.wait() {
                Ok(status) if !status.success() => log::warn!("speak command exited with {status}"),
                Err(e) => log::warn!("speak command wait failed: {e}"),
                _ => {}
            }
        }
    }
}

impl Drop for SpeakHook {
    fn drop(&mut self) {
        self.finish();
    }
}
