#pragma once

#include "guis/action.hpp"
#include "guis/agent.hpp"
#include "guis/augmentation.hpp"
#include "guis/clients.hpp"
#include "guis/dbscan.hpp"
#include "guis/document.hpp"
#include "guis/error.hpp"
#include "guis/geometry.hpp"
#include "guis/image.hpp"
#include "guis/perception.hpp"
#include "guis/retrieval.hpp"
#include "guis/simulator.hpp"
