#pragma once

#include "nlc/error.hpp"
#include "nlc/bytes.hpp"
#include "nlc/random.hpp"
#include "nlc/accum.hpp"
#include "nlc/criteria.hpp"
#include "nlc/trace.hpp"
#include "nlc/state_io.hpp"
#include "nlc/image.hpp"
#include "nlc/mlp.hpp"
#include "nlc/runner.hpp"
#include "nlc/mutate.hpp"
#include "nlc/fuzz.hpp"
#include "nlc/synth.hpp"
#include "nlc/bench.hpp"
