use carnot_lift::Result;

use crate::args::Command;
use crate::output::{Artifacts, Outcome};

mod algebra;
mod hoelder;
mod lift;
mod symplectic;

pub struct Context<'a> {
    pub seed: u64,
    pub inputs: &'a mut Vec<String>,
    pub artifacts: &'a mut Artifacts,
}

pub fn execute(command: &Command, ctx: Context<'_>) -> Result<Outcome> {
    match command {
        Command::ValidateAlgebra(a) => algebra::validate(a, ctx),
        Command::Mul(a) => algebra::mul(a, ctx),
        Command::Quotient(a) => algebra::quotient(a, ctx),
        Command::Dilate(a) => algebra::dilate(a, ctx),
        Command::Frame(a) => algebra::frame(a, ctx),
        Command::Coframe(a) => algebra::coframe(a, ctx),
        Command::BuildExtension(a) => algebra::build_extension(a, ctx),
        Command::Potential(a) => algebra::potential(a, ctx),
        Command::Obstruction(a) => algebra::obstruction(a, ctx),
        Command::Endpoint(a) => lift::endpoint(a, ctx),
        Command::LiftCurve(a) => lift::lift_curve(a, ctx),
        Command::CheckLift(a) => lift::check_lift(a, ctx),
        Command::LiftMap(a) => lift::lift_map(a, ctx),
        Command::FiberHom(a) => lift::fiber_hom(a, ctx),
        Command::Pansu(a) => lift::pansu(a, ctx),
        Command::MoserCorrect(a) => symplectic::moser_correct(a, ctx),
        Command::AreaCheck(a) => symplectic::area_check(a, ctx),
        Command::QuaternionicCheck(a) => symplectic::quaternionic_check(a, ctx),
        Command::DecayExperiment(a) => hoelder::decay_experiment(a, ctx),
        Command::Seminorm(a) => hoelder::seminorm(a, ctx),
        Command::Young(a) => hoelder::young(a, ctx),
        Command::Weierstrass(a) => hoelder::weierstrass(a, ctx),
        Command::FiliformGenerator(a) => lift::filiform_generator(a, ctx),
    }
}
