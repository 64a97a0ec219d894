#pragma once

#include "lightweather/ablation.hpp"
#include "lightweather/calendar.hpp"
#include "lightweather/checkpoint.hpp"
#include "lightweather/commands.hpp"
#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/numerics.hpp"
#include "lightweather/run_config.hpp"
#include "lightweather/synthetic.hpp"
#include "lightweather/training.hpp"
