#pragma once

#include "vbflex/core.hpp"
#include "vbflex/thermal.hpp"
#include "vbflex/perron.hpp"
#include "vbflex/simplex.hpp"
#include "vbflex/vb.hpp"
#include "vbflex/scenario.hpp"
#include "vbflex/policy.hpp"
#include "vbflex/surrogate.hpp"
#include "vbflex/dr.hpp"
#include "vbflex/io.hpp"
#include "vbflex/experiment.hpp"
#include "vbflex/cli.hpp"
