"""Regenerate the bundled measurement-error reference table.

The table supplies per-SNP standard-error pairs (exposure, outcome) for the
simulation presets.  Values are drawn once from log-normal distributions
whose scales match a large lipid GWAS paired with a cardiovascular-outcome
GWAS: exposure SEs around 0.005 and outcome SEs a couple of times larger.
The file is committed; rerunning this script reproduces it bit-for-bit.
"""

import numpy as np

N_ROWS = 2000
SEED = 20240601

def main():
    rng = np.random.default_rng(SEED)
    sigma_x = np.exp(rng.normal(np.log(0.0065), 0.25, N_ROWS))
    ratio = np.exp(rng.normal(np.log(1.65), 0.20, N_ROWS))
    sigma_y = sigma_x * ratio
    with open("src/rapsmr/data/sigma_reference.tsv", "w") as fh:
        fh.write("sigma_x\tsigma_y\n")
        for sx, sy in zip(sigma_x, sigma_y):
            fh.write(f"{sx:.10e}\t{sy:.10e}\n")

if __name__ == "__main__":
    main()
