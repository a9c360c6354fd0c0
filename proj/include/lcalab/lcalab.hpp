#pragma once

// Everything in one include.

#include "lcalab/attacks.hpp"
#include "lcalab/bigraphic.hpp"
#include "lcalab/block.hpp"
#include "lcalab/errors.hpp"
#include "lcalab/harness.hpp"
#include "lcalab/instance.hpp"
#include "lcalab/instance_io.hpp"
#include "lcalab/matching.hpp"
#include "lcalab/model.hpp"
#include "lcalab/oracle.hpp"
#include "lcalab/parallel.hpp"
#include "lcalab/params.hpp"
#include "lcalab/random.hpp"
#include "lcalab/rational.hpp"
#include "lcalab/report.hpp"
#include "lcalab/stats.hpp"
#include "lcalab/table.hpp"
#include "lcalab/toml.hpp"
#include "lcalab/treegame.hpp"
