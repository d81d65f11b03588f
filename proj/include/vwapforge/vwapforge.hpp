#pragma once

#include "vwapforge/error.hpp"
#include "vwapforge/numerics/tensor.hpp"
#include "vwapforge/numerics/rng.hpp"
#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tape.hpp"
#include "vwapforge/numerics/adam.hpp"
#include "vwapforge/numerics/finite_diff.hpp"
#include "vwapforge/numerics/checkpoint.hpp"
#include "vwapforge/market_data/bar.hpp"
#include "vwapforge/market_data/csv.hpp"
#include "vwapforge/market_data/synthetic.hpp"
#include "vwapforge/market_data/split.hpp"
#include "vwapforge/market_data/klines.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/recurrent/kan.hpp"
#include "vwapforge/recurrent/lstm.hpp"
#include "vwapforge/recurrent/tkan.hpp"
#include "vwapforge/allocation/model.hpp"
#include "vwapforge/allocation/execution.hpp"
#include "vwapforge/objectives/objectives.hpp"
#include "vwapforge/training/config.hpp"
#include "vwapforge/training/monitor.hpp"
#include "vwapforge/training/trainer.hpp"
#include "vwapforge/training/experiment.hpp"
