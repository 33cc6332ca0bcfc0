#pragma once

#include "divsat/analysis.hpp"
#include "divsat/diversity.hpp"
#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/filtergate.hpp"
#include "divsat/mmd.hpp"
#include "divsat/random.hpp"
#include "divsat/report.hpp"
#include "divsat/saturation.hpp"
#include "divsat/subprocess.hpp"
#include "divsat/synth.hpp"
