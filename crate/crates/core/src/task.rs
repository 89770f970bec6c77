use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The five tasks, one per bi-LSTM layer, in training order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Pos,
    Chunk,
    Dep,
    Rel,
    Ent,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Pos, Task::Chunk, Task::Dep, Task::Rel, Task::Ent];

    /// Layer index, 1 for POS through 5 for entailment.
    pub fn depth(self) -> usize {
        match self {
            Task::Pos => 1,
            Task::Chunk => 2,
            Task::Dep => 3,
            Task::Rel => 4,
            Task::Ent => 5,
        }
    }

    pub fn from_depth(depth: usize) -> Option<Task> {
        Task::ALL.get(depth.checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Pos => "pos",
            Task::Chunk => "chunk",
            Task::Dep => "dep",
            Task::Rel => "rel",
            Task::Ent => "ent",
        }
    }

    /// Single-letter code used by `--tasks` (a = POS ... e = entailment).
    pub fn letter(self) -> char {
        (b'a' + (self.depth() - 1) as u8) as char
    }

    pub fn is_token_level(self) -> bool {
        matches!(self, Task::Pos | Task::Chunk | Task::Dep)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pos" | "a" => Ok(Task::Pos),
            "chunk" | "chk" | "b" => Ok(Task::Chunk),
            "dep" | "c" => Ok(Task::Dep),
            "rel" | "relatedness" | "d" => Ok(Task::Rel),
            "ent" | "entailment" | "e" => Ok(Task::Ent),
            _ => Err(Error::InvalidArgument(format!("unknown task `{s}`"))),
        }
    }
}

/// Non-empty set of active tasks, kept in layer order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TaskSet(u8);

impl TaskSet {
    pub fn all() -> Self {
        TaskSet(0b11111)
    }

    pub fn from_tasks(tasks: &[Task]) -> Result<Self, Error> {
        let bits = tasks.iter().fold(0u8, |acc, t| acc | (1 << (t.depth() - 1)));
        if bits == 0 {
            return Err(Error::InvalidArgument("task set is empty".into()));
        }
        Ok(TaskSet(bits))
    }

    pub fn contains(self, task: Task) -> bool {
        self.0 & (1 << (task.depth() - 1)) != 0
    }

    pub fn tasks(self) -> impl Iterator<Item = Task> {
        Task::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// Nearest active task strictly below `task`.
    pub fn below(self, task: Task) -> Option<Task> {
        self.tasks().filter(|t| *t < task).last()
    }

    pub fn lowest(self) -> Task {
        self.tasks().next().expect("task sets are non-empty")
    }

    pub fn highest(self) -> Task {
        self.tasks().last().expect("task sets are non-empty")
    }

    /// Compact form, e.g. `abc`.
    pub fn code(self) -> String {
        self.tasks().map(Task::letter).collect()
    }
}

impl FromStr for TaskSet {
    type Err = Error;

    /// Accepts `all`, letter codes (`abc`, `de`) or comma-separated names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(TaskSet::all());
        }
        let tasks: Vec<Task> = if s.contains(',') {
            s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>()?
        } else if s.chars().all(|c| ('a'..='e').contains(&c)) {
            s.chars()
                .map(|c| c.to_string().parse())
                .collect::<Result<_, _>>()?
        } else {
            vec![s.parse()?]
        };
        TaskSet::from_tasks(&tasks)
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}
