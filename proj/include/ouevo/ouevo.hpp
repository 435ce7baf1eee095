#pragma once

#include "ouevo/bank.hpp"
#include "ouevo/cauchy.hpp"
#include "ouevo/coeffs.hpp"
#include "ouevo/derivs.hpp"
#include "ouevo/errors.hpp"
#include "ouevo/estimates.hpp"
#include "ouevo/evolution.hpp"
#include "ouevo/flow.hpp"
#include "ouevo/gaussmeasure.hpp"
#include "ouevo/hypotheses.hpp"
#include "ouevo/io.hpp"
#include "ouevo/linalg.hpp"
#include "ouevo/parallel.hpp"
#include "ouevo/quadrature.hpp"
#include "ouevo/weights.hpp"
