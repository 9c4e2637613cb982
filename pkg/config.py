"""
Configuration settings for the APVLM active perception simulator
"""
import os

# Application settings
APPNAME = "APVLM"
PORT = int(os.environ.get('PORT', 5111))
HOST = os.environ.get('HOST', '127.0.0.1')
LOG_LEVEL = os.environ.get('APVLM_LOG_LEVEL', 'INFO').upper()

# Flask settings (mock chat-completions endpoint)
DEBUG = os.environ.get('FLASK_DEBUG', 'False').lower() in ['true', '1', 'yes']

# Camera defaults
IMAGE_WIDTH = 640
IMAGE_HEIGHT = 480
FX = 300.0
FY = 300.0
CX = 320.0
CY = 240.0

# Episode defaults
MAX_ITERATIONS = 10
CONFIDENCE_THRESHOLD = 0.8
MARKER_NOISE_STD = 0.0
HOME_POSITION = (-0.1, 0.3, 0.8)

# Evaluation defaults
OSR_MARGIN = 0.1
TRIALS_PER_CELL = 10
WORKERS = int(os.environ.get('APVLM_WORKERS', 1))

# Remote vision-language endpoint
VLM_BASE_URL = os.environ.get('APVLM_VLM_BASE_URL', 'https://api.openai.com/v1')
VLM_MODEL = os.environ.get('APVLM_VLM_MODEL', 'gpt-4o')
VLM_API_KEY_ENV = os.environ.get('APVLM_VLM_API_KEY_ENV', 'OPENAI_API_KEY')
VLM_TIMEOUT = float(os.environ.get('APVLM_VLM_TIMEOUT', 60))
VLM_MAX_RETRIES = int(os.environ.get('APVLM_VLM_MAX_RETRIES', 2))
VLM_TEMPERATURE = 0.0

# Template folder settings
TEMPLATE_FOLDER = 'src/templates'
PROMPT_FOLDER = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src', 'templates', 'prompts')
