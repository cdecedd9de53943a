#pragma once

#include "folcoil/charts.hpp"
#include "folcoil/forms.hpp"

namespace folcoil {

/// Empty tangential form of the given degree on a chart.
TangentialForm tangential_zero(const FoliationChart& chart, int degree);
TangentialForm tangential_scalar(const FoliationChart& chart, const ScalarField& g);

/// Lift of a tangential 1-form: equal on leaf directions, zero on L.
FullForm lift_L(const TangentialForm& w, const FoliationChart& chart);

/// Restriction of an ambient form to the leaves.
TangentialForm project_pi(const FullForm& s, const FoliationChart& chart);

/// Leafwise exterior derivative.
TangentialForm tangential_d(const TangentialForm& w, const FoliationChart& chart);

/// Tangential one-form mu with d lambda = mu-bar ^ lambda.
TangentialForm compute_mu(const FoliationChart& chart);

/// d_F w - mu ^ w, with mu from compute_mu or supplied explicitly.
TangentialForm twisted_d(const TangentialForm& w, const FoliationChart& chart);
TangentialForm twisted_d(const TangentialForm& w, const FoliationChart& chart, const TangentialForm& mu);

/// max |d'(e^h w) - e^h d(w)| where d twists by mu and d' by mu + d_F h.
double gauge_chain_residual(const TangentialForm& w, const ScalarField& h, const FoliationChart& chart);

/// Value of the lifted/ambient form on L (pointwise), for degree-1 forms.
ScalarField contract_L(const FullForm& s, const FoliationChart& chart);

}  // namespace folcoil
