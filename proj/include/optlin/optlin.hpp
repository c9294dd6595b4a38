#ifndef OPTLIN_OPTLIN_HPP
#define OPTLIN_OPTLIN_HPP

#include "optlin/acpf_dslack.hpp"
#include "optlin/dcopf_qp.hpp"
#include "optlin/errors.hpp"
#include "optlin/evaluator.hpp"
#include "optlin/gradcheck.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/io.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/loss.hpp"
#include "optlin/parallel.hpp"
#include "optlin/qp_solver.hpp"
#include "optlin/sensitivity.hpp"
#include "optlin/trainer.hpp"

#endif  // OPTLIN_OPTLIN_HPP
