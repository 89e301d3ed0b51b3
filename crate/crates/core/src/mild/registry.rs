use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{solve_marching, solve_monolithic, solve_picard, MildProblem, PicardConfig, Quadrature};
use crate::error::{Error, Result};
use crate::grid::{HistorySegment, Trajectory};

/// A solved trajectory plus what the solver has to say about it.
#[derive(Clone, Debug)]
pub struct MildSolution {
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub ratios: Vec<f64>,
    pub mu: Option<f64>,
}

impl MildSolution {
    fn direct(trajectory: Trajectory) -> Self {
        MildSolution {
            trajectory,
            iterations: 1,
            ratios: Vec::new(),
            mu: None,
        }
    }
}

/// A strategy for the mild solution from an initial step `start`.
pub trait MildSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &MildProblem, h: &HistorySegment, start: usize) -> Result<MildSolution>;
}

#[derive(Clone, Debug)]
pub struct PicardSolver {
    pub config: PicardConfig,
}

impl MildSolver for PicardSolver {
    fn name(&self) -> &'static str {
        "picard"
    }

    fn solve(&self, problem: &MildProblem, h: &HistorySegment, start: usize) -> Result<MildSolution> {
        let out = solve_picard(problem, h, &self.config, start)?;
        Ok(MildSolution {
            trajectory: out.trajectory,
            iterations: out.iterations,
            ratios: out.ratios,
            mu: Some(out.mu),
        })
    }
}

#[derive(Clone, Debug)]
pub struct MarchingSolver {
    pub quadrature: Quadrature,
}

impl MildSolver for MarchingSolver {
    fn name(&self) -> &'static str {
        "marching"
    }

    fn solve(&self, problem: &MildProblem, h: &HistorySegment, start: usize) -> Result<MildSolution> {
        solve_marching(problem, h, self.quadrature, start).map(MildSolution::direct)
    }
}

#[derive(Clone, Debug)]
pub struct MonolithicSolver;

impl MildSolver for MonolithicSolver {
    fn name(&self) -> &'static str {
        "monolithic"
    }

    fn solve(&self, problem: &MildProblem, h: &HistorySegment, start: usize) -> Result<MildSolution> {
        solve_monolithic(problem, h, start).map(MildSolution::direct)
    }
}

/// What a solver factory may read.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub quadrature: Quadrature,
    pub picard: PicardConfig,
}

type Factory = Box<dyn Fn(&SolverSettings) -> Box<dyn MildSolver> + Send + Sync>;

/// Solvers by name, selected at run time.
pub struct SolverRegistry {
    entries: BTreeMap<String, Factory>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry::empty();
        r.register("picard", |s| {
            let mut config = s.picard.clone();
            config.quadrature = s.quadrature;
            Box::new(PicardSolver { config })
        });
        r.register("marching", |s| Box::new(MarchingSolver { quadrature: s.quadrature }));
        r.register("monolithic", |_| Box::new(MonolithicSolver));
        r
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&SolverSettings) -> Box<dyn MildSolver> + Send + Sync + 'static,
    ) {
        self.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, settings: &SolverSettings) -> Result<Box<dyn MildSolver>> {
        self.entries
            .get(name)
            .map(|f| f(settings))
            .ok_or_else(|| Error::Unknown {
                kind: "solver",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
