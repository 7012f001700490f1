use crate::errors::CliError;
use crate::VerifyArgs;
use wae_core::ot::{
    factorization_check, parse_instances, random_instance, squared_euclidean,
    variance_decomposition_check, VerificationInstance, CERT_TOL,
};
use wae_core::rng::{stream_rng, Stream};

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let instances: Vec<VerificationInstance> = match (&args.instances, &args.random) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io("reading instances", e))?;
            parse_instances(&text)?
        }
        (None, Some(spec)) => {
            let (count, seed) = (spec[0], spec[1]);
            let mut rng = stream_rng(seed, Stream::Eval);
            (0..count)
                .map(|_| random_instance(&mut rng, args.variances))
                .collect()
        }
        _ => {
            return Err(CliError::Config(
                "verify needs exactly one of --instances PATH or --random COUNT SEED".into(),
            ))
        }
    };
    if instances.is_empty() {
        return Err(CliError::Data("no instances to verify".into()));
    }

    println!("{:>5} {:>14} {:>14} {:>12}  {}", "#", "lhs", "rhs", "gap", "check");
    let mut failures = 0usize;
    for (i, inst) in instances.iter().enumerate() {
        let eq = factorization_check(&inst.data, &inst.prior, &inst.decoder, squared_euclidean)?;
        let ok = eq.gap < CERT_TOL;
        if !ok {
            failures += 1;
        }
        println!(
            "{:>5} {:>14.9} {:>14.9} {:>12.3e}  factorization {}",
            i,
            eq.lhs,
            eq.rhs,
            eq.gap,
            if ok { "ok" } else { "FAIL" }
        );
        if let Some(vars) = &inst.variances {
            let rep =
                variance_decomposition_check(&inst.data, &inst.prior, &inst.decoder, vars)?;
            let ok = rep.gap < CERT_TOL;
            if !ok {
                failures += 1;
            }
            println!(
                "{:>5} {:>14.9} {:>14.9} {:>12.3e}  variance-decomposition {}",
                i,
                rep.direct,
                rep.decomposed,
                rep.gap,
                if ok { "ok" } else { "FAIL" }
            );
        }
    }
    let total = instances.len();
    if failures > 0 {
        Err(CliError::Verification(format!(
            "{failures} of {total} checks exceeded the {CERT_TOL:.0e} gap tolerance"
        )))
    } else {
        println!("{total}/{total} instances within {CERT_TOL:.0e}");
        Ok(())
    }
}
