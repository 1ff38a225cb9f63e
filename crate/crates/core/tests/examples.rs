macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(load_and_detect, "load_and_detect.rs");
example!(gee_fit, "gee_fit.rs");
example!(critical_values, "critical_values.rs");
example!(mesd_walkthrough, "mesd_walkthrough.rs");
example!(simulate_table, "simulate_table.rs");
example!(plot_effects, "plot_effects.rs");

#[test]
fn load_and_detect_runs() {
    load_and_detect::run_example().unwrap();
}

#[test]
fn gee_fit_runs() {
    gee_fit::run_example().unwrap();
}

#[test]
fn critical_values_runs() {
    critical_values::run_example().unwrap();
}

#[test]
fn mesd_walkthrough_runs() {
    mesd_walkthrough::run_example().unwrap();
}

#[test]
fn simulate_table_runs() {
    simulate_table::run_example().unwrap();
}

#[test]
fn plot_effects_runs() {
    plot_effects::run_example().unwrap();
}
