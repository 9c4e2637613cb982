"""
APVLM Development Server

Serves the mock chat-completions endpoint for local work against the VLM
client. Point an experiment's endpoint base_url at http://HOST:PORT/v1.
"""

import config
from src import configure_logging, create_app

# Create the Flask application
app = create_app()

if __name__ == '__main__':
    configure_logging()
    print(f"Starting {config.APPNAME} mock endpoint on http://{config.HOST}:{config.PORT}/v1 ...")
    app.run(host=config.HOST, port=config.PORT, debug=config.DEBUG)
