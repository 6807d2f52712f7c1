"""Monte-Carlo jackknife MSPE estimation for Fay-Herriot small-area models."""

import json

from ._mcjack import (
    AreaDataset,
    Error,
    NumericError,
    ValidationError,
    __version__,
    analytic_mspe_A0,
    chi_square_cdf,
    chi_square_quantile,
    dhm_test,
    fit,
    gls_beta,
    hospital,
    mcjack_estimate,
    pr_mspe,
    prasad_rao_A,
    predict,
    profile_loglik,
    read_csv,
    select_bic,
)
from ._mcjack import analyze_hospital as _analyze_hospital


def analyze_hospital(K=4000, seed=1):
    return json.loads(_analyze_hospital(K, seed))
