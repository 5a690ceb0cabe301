#ifndef CONFGP_CONFGP_HPP
#define CONFGP_CONFGP_HPP

#include "confgp/errors.hpp"
#include "confgp/dataset.hpp"
#include "confgp/kernels.hpp"
#include "confgp/gp_core.hpp"
#include "confgp/optimizer.hpp"
#include "confgp/random.hpp"
#include "confgp/covariance_cache.hpp"
#include "confgp/mle.hpp"
#include "confgp/diagnostics.hpp"
#include "confgp/mcmc.hpp"
#include "confgp/testbed.hpp"
#include "confgp/design.hpp"
#include "confgp/io.hpp"
#include "confgp/benchmark.hpp"

#endif
