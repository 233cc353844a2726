#pragma once

#include "mpfedxgb/audit.hpp"
#include "mpfedxgb/bench.hpp"
#include "mpfedxgb/common.hpp"
#include "mpfedxgb/config.hpp"
#include "mpfedxgb/dataset.hpp"
#include "mpfedxgb/federation.hpp"
#include "mpfedxgb/div_newton.hpp"
#include "mpfedxgb/leaf_weight.hpp"
#include "mpfedxgb/loss.hpp"
#include "mpfedxgb/matrix.hpp"
#include "mpfedxgb/metrics.hpp"
#include "mpfedxgb/model.hpp"
#include "mpfedxgb/oracle.hpp"
#include "mpfedxgb/params.hpp"
#include "mpfedxgb/party.hpp"
#include "mpfedxgb/pipeline.hpp"
#include "mpfedxgb/predict.hpp"
#include "mpfedxgb/quantile.hpp"
#include "mpfedxgb/report.hpp"
#include "mpfedxgb/session.hpp"
#include "mpfedxgb/shares.hpp"
#include "mpfedxgb/split_select.hpp"
#include "mpfedxgb/tcp_transport.hpp"
#include "mpfedxgb/transport.hpp"
#include "mpfedxgb/tree_build.hpp"
#include "mpfedxgb/wire.hpp"
