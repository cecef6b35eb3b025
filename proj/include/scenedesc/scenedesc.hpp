#pragma once

#include "scenedesc/descriptor.hpp"
#include "scenedesc/error.hpp"
#include "scenedesc/infodensity.hpp"
#include "scenedesc/labelmap.hpp"
#include "scenedesc/pipeline.hpp"
#include "scenedesc/raster.hpp"
#include "scenedesc/segmenter.hpp"
#include "scenedesc/semantics.hpp"
