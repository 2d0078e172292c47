//! Ready-to-render gnuplot scripts for the CSV outputs.

use photonlab::fit::{G2Fit, SaturationFit};
use photonlab::polarimetry::PolarScanFit;

const HEADER: &str = "set datafile separator ','\nset key top left\n";

pub fn g2_script(csv: &str, fit: &G2Fit) -> String {
    let mut s = String::from(HEADER);
    s.push_str("set xlabel 'delay (ns)'\nset ylabel 'g2(tau)'\n");
    s.push_str("set arrow from graph 0, first 0.5 to graph 1, first 0.5 nohead dt 2\n");
    match fit.params() {
        Some(p) => {
            s.push_str(&format!(
                "b = {}\ng0 = {}\nk = {}\nf(x) = b - (b - g0) * exp(-k * abs(x) * 1e-9)\n",
                p.baseline, p.g2_0, p.k
            ));
            s.push_str(&format!(
                "plot '{csv}' every ::1 using ($1/1000):3:4 with yerrorbars title 'data', f(x) title 'fit'\n"
            ));
        }
        None => {
            s.push_str(&format!(
                "plot '{csv}' every ::1 using ($1/1000):3:4 with yerrorbars title 'data', {} title 'flat'\n",
                fit.g2_0.value
            ));
        }
    }
    s
}

pub fn saturation_script(csv: &str, fit: &SaturationFit) -> String {
    let p = fit.params;
    let mut s = String::from(HEADER);
    s.push_str("set logscale x\nset xlabel 'pump intensity (W/m^2)'\nset ylabel 'count rate (1/s)'\n");
    s.push_str(&format!(
        "F1 = {}\nIs = {}\nF2 = {}\nf(x) = F1 * x / (2 * Is + x) + F2 * x\nbg(x) = F2 * x\n",
        p.f1, p.i_sat, p.f2
    ));
    s.push_str(&format!(
        "plot '{csv}' every ::1 using 1:3:4 with yerrorbars title 'data', f(x) title 'fit', \
         bg(x) dt 3 title 'background', '{csv}' every ::1 using 1:6 with linespoints dt 2 title 'background subtracted'\n"
    ));
    s
}

pub fn polar_scan_script(csv: &str, fit: &PolarScanFit) -> String {
    let mut s = String::from(HEADER);
    s.push_str("set polar\nset angles degrees\nset size square\nunset xtics\nunset ytics\nset grid polar 30\n");
    s.push_str(&format!(
        "S0 = {}\ns1 = {}\ns2 = {}\nf(t) = 0.5 * S0 * (1 + s1 * cos(2 * t) + s2 * sin(2 * t))\n",
        fit.s0.value, fit.s1.value, fit.s2.value
    ));
    s.push_str(&format!("plot '{csv}' every ::1 using 1:2 with points title 'data', f(t) title 'fit'\n"));
    s
}
