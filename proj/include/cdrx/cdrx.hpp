#pragma once

#include "cdrx/activity.hpp"
#include "cdrx/config.hpp"
#include "cdrx/core.hpp"
#include "cdrx/digest.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/ingest.hpp"
#include "cdrx/knowledge_base.hpp"
#include "cdrx/ml.hpp"
#include "cdrx/outputs.hpp"
#include "cdrx/pipeline.hpp"
#include "cdrx/places.hpp"
#include "cdrx/social.hpp"
#include "cdrx/synthgen.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"
